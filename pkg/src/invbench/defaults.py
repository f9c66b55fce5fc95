"""Pinned benchmark constants.

Everything a scenario or controller needs that is not derivable from the
topology lives here, so a published result can be audited against one file.
"""

# Benchmark mean retail demand level (units/period).
MEAN_DEMAND = 20.0

# Episode contract.
HORIZON = 30
DISCOUNT = 1.0
CANONICAL_SEEDS = tuple(range(10))

# Heuristic policy constants.
Z_SAFETY = 1.64           # one-sided ~95% normal safety factor
BATCH_PERIODS = 1.0       # (s,S) batch = one period of mean demand
HOLT_ALPHA = 0.3
HOLT_BETA = 0.1
PRIOR_MEAN = MEAN_DEMAND  # blind fallback before any demand is observed

# Rolling-horizon planner knobs.
DLP_HORIZON_CAP = None    # plan to the end of the episode
MSSP_HORIZON_CAP = 10
MSSP_BRANCHING = (3, 3, 3)  # branch factors at the first stages, flat after
GOODWILL_ORACLE_ITERS = 10

# Synthetic demand regimes (per retail edge, applied to MEAN_DEMAND).
TREND_SLOPE = 0.4
SEASONAL_AMPLITUDE = 4.0
SEASONAL_PERIOD = 10.0
SHOCK_TIME = 12
SHOCK_MULTIPLIER = 1.8
SHOCK_DURATION = 6

# The bundled volatile external trace. Real retail panels are not
# redistributable, so the trace-replay scenario ships this pinned stand-in:
# a bursty 30-period unit-sales path (rolling CV ~0.74) pre-scaled to the
# benchmark mean. Users with a licensed panel can swap in a real window via
# demand.select_trace_window.
VOLATILE_TRACE = (
    8.0, 5.0, 31.0, 12.0, 4.0, 9.0, 47.0, 22.0, 6.0, 13.0,
    55.0, 18.0, 7.0, 3.0, 26.0, 41.0, 10.0, 5.0, 16.0, 38.0,
    9.0, 4.0, 29.0, 51.0, 14.0, 6.0, 21.0, 44.0, 12.0, 34.0,
)
_scale = MEAN_DEMAND * len(VOLATILE_TRACE) / sum(VOLATILE_TRACE)
VOLATILE_TRACE = tuple(round(v * _scale, 6) for v in VOLATILE_TRACE)
del _scale

# Wire protocol.
PROTOCOL_VERSION = 1
ACTION_BOUND_PERIODS = 2.0  # scaled-action bound = this many lead-times of mean flow
