from django.db import models


class SimScheme(models.TextChoices):
    BASELINE = "baseline", "Baseline threshold access"
    CAPTURE = "capture", "Capture of the stronger of two"
    ENHANCED = "enhanced", "Mini-slot collision avoidance"


class ReportScheme(models.TextChoices):
    HOMOGENEOUS = "homogeneous"
    HETEROGENEOUS = "heterogeneous"
    QOS = "qos"
    EQUAL_SHARE = "equal_share"
    CAPTURE = "capture"
    ENHANCED = "enhanced"
    CENTRALIZED = "centralized"


class ThresholdRule(models.TextChoices):
    GAUSSIAN_EXACT = "gaussian_exact", "Exact Gaussian quantile"
    GAUSSIAN_SERIES = "gaussian_series", "Truncated series quantile"
    GUMBEL = "gumbel", "Block-maxima Gumbel return level"
    EXPLICIT = "explicit", "Explicit common threshold"
    RATE_MATCH = "rate_match", "Common threshold with matched total rate"
    PER_USER_QOS = "per_user_qos", "Per-user QoS return level"


class RateLaw(models.TextChoices):
    EVT = "evt", "Extreme-value exponential rates"
    EXACT = "exact", "Exact Gaussian survival rates"


class BinLaw(models.TextChoices):
    EXPONENTIAL = "exponential", "Exponential excess boundaries"
    EXACT = "exact", "Exact conditional Gaussian boundaries"


class ReportFormat(models.TextChoices):
    CSV = "csv"
    JSON = "json"
