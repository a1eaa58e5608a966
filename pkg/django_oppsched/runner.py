"""
Sweeps, simulated-versus-analytic comparison and report files.

Report columns, in order, are the fields of :class:`ResultRecord`;
``runtime_seconds`` is written only when timing is requested. Missing
values are empty in CSV and ``null`` in JSON.
"""
import csv
import io
import json
import logging
import math
import os
import tempfile
import time
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from django_oppsched.analytic import (
    capacity_capture,
    capacity_enhanced,
    capacity_heterogeneous,
    capacity_homogeneous,
    capacity_threshold_vector,
)
from django_oppsched.choices import (
    RateLaw,
    ReportFormat,
    ReportScheme,
    SimScheme,
    ThresholdRule,
)
from django_oppsched.evt import expected_max
from django_oppsched.exceptions import DomainError, ScenarioError
from django_oppsched.point_process import total_rate
from django_oppsched.simulator import resolve_thresholds, simulate
from django_oppsched.utils import get_option

logger = logging.getLogger(__name__)

REL_EPSILON = 1e-9

COMPARED = ("capacity", "p_idle", "p_collision", "p_utilized", "delay")


@dataclass(frozen=True)
class ResultRecord:
    scenario_id: str
    scheme: str
    K: int
    k: float
    l: int  # noqa: E741
    threshold_rule: str
    seed: int
    slots: int
    analytic_capacity: float = None
    analytic_p_idle: float = None
    analytic_p_collision: float = None
    analytic_p_utilized: float = None
    analytic_delay: float = None
    expected_max: float = None
    sim_capacity: float = None
    sim_capacity_hw: float = None
    sim_p_idle: float = None
    sim_p_idle_hw: float = None
    sim_p_collision: float = None
    sim_p_collision_hw: float = None
    sim_p_utilized: float = None
    sim_p_utilized_hw: float = None
    sim_delay: float = None
    rel_err_capacity: float = None
    rel_err_p_idle: float = None
    rel_err_p_collision: float = None
    rel_err_p_utilized: float = None
    rel_err_delay: float = None
    runtime_seconds: float = None


def relative_error(simulated, analytic):
    if simulated is None or analytic is None:
        return None
    return abs(simulated - analytic) / max(abs(analytic), REL_EPSILON)


def _common_threshold(thresholds):
    if np.all(thresholds == thresholds[0]):
        return float(thresholds[0])
    return None


def _effective_k(config, u):
    """Mean exceedances per slot of homogeneous users at threshold ``u``"""
    if config.threshold_rule == ThresholdRule.GAUSSIAN_EXACT:
        return config.k
    return total_rate(u, config.profiles, law=RateLaw.EXACT).mean_count


def _homogeneous_k(config, u):
    k = _effective_k(config, u)
    if 0 < k < config.K:
        return k
    logger.warning(
        "Threshold %g leaves %g of K=%d users exceeding per slot in "
        "scenario %r; no homogeneous formula applies",
        u,
        k,
        config.K,
        config.scenario_id,
    )
    return None


def analytic_report_for(config, thresholds=None):
    """
    The closed-form report matching a scenario, or ``None``.

    Homogeneous users use the single-user formulas; heterogeneous users
    use the rate-weighted forms. Capture needs a common threshold and the
    enhanced scheme needs homogeneous users. Infinite thresholds and
    formulas evaluated outside their domain log a warning instead.
    """
    if thresholds is None:
        thresholds = resolve_thresholds(config)
    if not np.all(np.isfinite(thresholds)):
        logger.warning(
            "No formula for infinite thresholds in scenario %r",
            config.scenario_id,
        )
        return None
    try:
        return _formula_report(config, thresholds)
    except DomainError as e:
        logger.warning(
            "Formula does not apply to scenario %r: %s", config.scenario_id, e
        )
        return None


def _formula_report(config, thresholds):
    u = _common_threshold(thresholds)
    first = config.profiles[0]
    homogeneous = config.is_homogeneous

    if config.scheme == SimScheme.BASELINE:
        if homogeneous and u is not None:
            k = _homogeneous_k(config, u)
            if k is None:
                return None
            return capacity_homogeneous(
                config.K, k, first.mu, first.sigma, threshold=u
            )
        if u is not None:
            return capacity_heterogeneous(u, config.profiles, config.rate_law)
        scheme = (
            ReportScheme.QOS
            if config.threshold_rule == ThresholdRule.PER_USER_QOS
            else ReportScheme.HETEROGENEOUS
        )
        return capacity_threshold_vector(
            thresholds, config.profiles, scheme, config.rate_law
        )

    if config.scheme == SimScheme.CAPTURE:
        if u is None:
            logger.warning(
                "No capture formula for per-user thresholds in scenario %r",
                config.scenario_id,
            )
            return None
        return capacity_capture(
            u, config.profiles, config.rate_law, seed=config.seed
        )

    if not homogeneous or u is None:
        logger.warning(
            "No enhanced-scheme formula for heterogeneous users in "
            "scenario %r",
            config.scenario_id,
        )
        return None
    k = _homogeneous_k(config, u)
    if k is None:
        return None
    return capacity_enhanced(
        config.K, k, config.l, first.mu, first.sigma, threshold=u
    )


def compare(config, threads=None):
    """Simulate one configuration and compare it with its formula"""
    start = time.perf_counter()
    thresholds = resolve_thresholds(config)
    report = analytic_report_for(config, thresholds)
    stats = simulate(config, threads)
    runtime = time.perf_counter() - start

    first = config.profiles[0]
    simulated = {
        "capacity": stats.mean_capacity,
        "p_idle": stats.p_idle,
        "p_collision": stats.p_collision,
        "p_utilized": stats.p_utilized,
        "delay": stats.mean_delay,
    }
    analytic = dict.fromkeys(COMPARED)
    if report is not None:
        analytic.update(
            capacity=report.expected_capacity,
            p_idle=report.p_idle,
            p_collision=report.p_collision,
            p_utilized=report.p_utilized,
            delay=report.expected_delay_minislots,
        )
    record = ResultRecord(
        scenario_id=config.scenario_id,
        scheme=str(config.scheme),
        K=config.K,
        k=config.k,
        l=config.l,
        threshold_rule=str(config.threshold_rule),
        seed=config.seed,
        slots=config.slots,
        expected_max=(
            expected_max(config.K, first.mu, first.sigma)
            if config.is_homogeneous
            else None
        ),
        sim_capacity_hw=stats.capacity_half_width,
        sim_p_idle_hw=stats.half_width(stats.p_idle),
        sim_p_collision_hw=stats.half_width(stats.p_collision),
        sim_p_utilized_hw=stats.half_width(stats.p_utilized),
        runtime_seconds=runtime,
        **{f"analytic_{name}": analytic[name] for name in COMPARED},
        **{f"sim_{name}": simulated[name] for name in COMPARED},
        **{
            f"rel_err_{name}": relative_error(simulated[name], analytic[name])
            for name in COMPARED
        },
    )
    logger.info(
        "%s %s K=%d k=%s l=%s: %.3fs",
        config.scenario_id,
        config.scheme,
        config.K,
        config.k,
        config.l,
        runtime,
    )
    return record


def _grid_point(config, axis, value):
    if axis == "k":
        return replace(config, k_target=value.value, k_rule=value.rule)
    if axis == "l":
        return replace(config, bins=value.value, bins_rule=value.rule)
    if axis == "K":
        return config.with_K(value)
    return replace(config, scheme=value)


def plan_sweep(config, sweep=None):
    """
    Every configuration of the sweep, validated before any run.

    Raises ``ValidationError`` or :class:`ScenarioError` for the first
    invalid grid point.
    """
    if not sweep:
        configs = [config]
    else:
        configs = [
            _grid_point(config, sweep.axis, value) for value in sweep.values
        ]
    for point in configs:
        resolve_thresholds(point)
    return configs


def run_sweep(config, sweep=None, threads=None):
    """One :class:`ResultRecord` per grid point, in axis order"""
    return [compare(point, threads) for point in plan_sweep(config, sweep)]


def _columns(timing):
    names = [f.name for f in fields(ResultRecord)]
    if not timing:
        names.remove("runtime_seconds")
    return names


def _format(value, digits):
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.{digits}g}"
    return str(value)


def _json_value(value, digits):
    if isinstance(value, (float, np.floating)):
        if not math.isfinite(value):
            return None
        return float(f"{float(value):.{digits}g}")
    if isinstance(value, np.integer):
        return int(value)
    return value


def render_report(records, format=ReportFormat.CSV, timing=None):
    """Report text for ``records``"""
    records = list(records)
    if not records:
        raise ScenarioError("No records to report")
    if timing is None:
        timing = get_option("report_timing")
    digits = get_option("report_digits")
    columns = _columns(timing)
    rows = [asdict(record) for record in records]

    if format == ReportFormat.JSON:
        objects = [
            {name: _json_value(row[name], digits) for name in columns}
            for row in rows
        ]
        return json.dumps(objects, indent=2) + "\n"
    if format != ReportFormat.CSV:
        raise ScenarioError(f"Unknown report format '{format}'")
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_format(row[name], digits) for name in columns])
    return buffer.getvalue()


def emit_report(records, format=ReportFormat.CSV, out=None, timing=None):
    """
    Write the report for ``records`` to ``out``.

    The file is written next to its destination and moved into place, so
    a failed write leaves no partial file.
    """
    text = render_report(records, format, timing)
    out = Path(out)
    fd, tmp = tempfile.mkstemp(
        dir=out.parent, prefix=f".{out.name}.", suffix=".tmp"
    )
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, out)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_report(path):
    """Records from a JSON report written by :func:`emit_report`"""
    try:
        objects = json.loads(Path(path).read_text(encoding="utf-8"))
    except ValueError as e:
        raise DomainError(f"{path} is not a JSON report: {e}") from e
    return [ResultRecord(**obj) for obj in objects]
