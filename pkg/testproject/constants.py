import math
from pathlib import Path

SQRT2 = math.sqrt(2)

# per-user statistics of the non-uniform population
MU_RANGE = (SQRT2 - 1, SQRT2 + 1)

SIGMA_RANGE = (0.03, 3.0)

PROFILE_SEED = 7

# mean and spread of a 32 x 128 MIMO capacity
MIMO_MU = SQRT2

MIMO_SIGMA = 0.03

# E[log2(1 + X)] for X ~ Exp(1), e * E1(1) / log(2)
SISO_MEAN_CAPACITY = 0.86034738

MINIMAL_SCENARIO = """\
[scenario]
K = 100
scheme = baseline
k = 1

[profiles]
mu = 0
sigma = 1
"""

NON_UNIFORM_SCENARIO = """\
[scenario]
id = non_uniform
K = 250
scheme = baseline
threshold_rule = rate_match
k = 1
slots = 20000
seed = 3

[profiles]
mu = uniform(0.41421356, 2.41421356)
sigma = uniform(0.03, 3)
profile_seed = 7
"""

SCENARIO_DIR = Path(__file__).resolve().parent / "scenarios"
