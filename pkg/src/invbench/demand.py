"""Demand generation: composable non-stationary means, goodwill feedback,
deterministic trace replay, and external-panel trace selection.

The exogenous mean path starts from a base level (or a replayed trace) and
applies an ordered list of modifiers. Goodwill is a single sentiment scalar
that multiplies the mean of the next draw: it decays fast after a stockout
and recovers slowly otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

from .rng import RngStream

GOODWILL_DROP = 0.90
GOODWILL_RECOVER = 1.01
GOODWILL_FLOOR = 0.2
GOODWILL_CAP = 2.0


@dataclass(frozen=True)
class Modifier:
    """One mean-path perturbation. ``kind`` selects which fields apply:

    - ``trend``: adds ``slope * t``
    - ``seasonal``: adds ``amplitude * sin(2*pi*(t + phase) / period)``
    - ``shock``: multiplies by ``multiplier`` for ``time <= t < time + duration``
    - ``noise_scale``: scales the deviation from the pre-modifier path by
      ``factor`` (factor 1 is the identity, 0 collapses to the base path)
    """

    kind: str
    slope: float = 0.0
    amplitude: float = 0.0
    period: float = 1.0
    phase: float = 0.0
    time: int = 0
    multiplier: float = 1.0
    duration: int = 0
    factor: float = 1.0

    def to_dict(self) -> dict:
        if self.kind == "trend":
            return {"kind": "trend", "slope": self.slope}
        if self.kind == "seasonal":
            return {"kind": "seasonal", "amplitude": self.amplitude,
                    "period": self.period, "phase": self.phase}
        if self.kind == "shock":
            return {"kind": "shock", "time": self.time,
                    "multiplier": self.multiplier, "duration": self.duration}
        if self.kind == "noise_scale":
            return {"kind": "noise_scale", "factor": self.factor}
        raise ValueError(f"unknown modifier kind {self.kind!r}")

    @staticmethod
    def from_dict(raw: Mapping) -> "Modifier":
        return Modifier(**raw)


def trend(slope: float) -> Modifier:
    return Modifier(kind="trend", slope=slope)


def seasonal(amplitude: float, period: float, phase: float = 0.0) -> Modifier:
    return Modifier(kind="seasonal", amplitude=amplitude, period=period, phase=phase)


def shock(time: int, multiplier: float, duration: int) -> Modifier:
    return Modifier(kind="shock", time=time, multiplier=multiplier, duration=duration)


def noise_scale(factor: float) -> Modifier:
    return Modifier(kind="noise_scale", factor=factor)


@dataclass(frozen=True)
class DemandModel:
    base_mean: float = 20.0
    base_process: str = "poisson"  # poisson | deterministic_trace
    modifiers: tuple[Modifier, ...] = ()
    trace: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.base_process not in ("poisson", "deterministic_trace"):
            raise ValueError(f"unknown base process {self.base_process!r}")
        if self.base_process == "deterministic_trace" and not self.trace:
            raise ValueError("deterministic_trace requires a trace")
        if self.trace is not None and any(v < 0 for v in self.trace):
            raise ValueError("trace values must be non-negative")

    def to_dict(self) -> dict:
        out: dict = {"base_mean": self.base_mean, "base_process": self.base_process,
                     "modifiers": [m.to_dict() for m in self.modifiers]}
        if self.trace is not None:
            out["trace"] = list(self.trace)
        return out

    @staticmethod
    def from_dict(raw: Mapping) -> "DemandModel":
        return DemandModel(
            base_mean=float(raw.get("base_mean", 20.0)),
            base_process=str(raw.get("base_process", "poisson")),
            modifiers=tuple(Modifier.from_dict(m) for m in raw.get("modifiers", [])),
            trace=tuple(raw["trace"]) if raw.get("trace") is not None else None,
        )


def exogenous_mean(model: DemandModel, t: int) -> float:
    """Mean demand at period ``t`` after applying modifiers in declared order."""
    if t < 0:
        raise ValueError("period must be non-negative")
    if model.trace is not None:
        if t >= len(model.trace):
            raise IndexError(f"period {t} beyond trace length {len(model.trace)}")
        base = float(model.trace[t])
    else:
        base = model.base_mean
    value = base
    for m in model.modifiers:
        if m.kind == "trend":
            value += m.slope * t
        elif m.kind == "seasonal":
            value += m.amplitude * math.sin(2.0 * math.pi * (t + m.phase) / m.period)
        elif m.kind == "shock":
            if m.time <= t < m.time + m.duration:
                value *= m.multiplier
        elif m.kind == "noise_scale":
            value = base + m.factor * (value - base)
        else:
            raise ValueError(f"unknown modifier kind {m.kind!r}")
    return max(0.0, value)


@dataclass(frozen=True)
class GoodwillState:
    s: float = 1.0
    enabled: bool = True
    drop: float = GOODWILL_DROP
    recover: float = GOODWILL_RECOVER
    floor: float = GOODWILL_FLOOR
    cap: float = GOODWILL_CAP


def goodwill_update(g: GoodwillState, stockout: bool) -> GoodwillState:
    """Asymmetric sentiment update: fast decay on a stockout, slow recovery."""
    if not g.enabled:
        return g
    if stockout:
        return replace(g, s=max(g.floor, g.drop * g.s))
    return replace(g, s=min(g.cap, g.recover * g.s))


def effective_mean(g: GoodwillState, exo_mean: float) -> float:
    if exo_mean < 0:
        raise ValueError("mean must be non-negative")
    return exo_mean if not g.enabled else g.s * exo_mean


def draw_demand(model: DemandModel, lam_eff: float, rng: RngStream) -> float:
    """Realize one demand value; advances the stream by exactly one draw.

    Poisson bases sample an integer count; deterministic traces replay the
    effective mean unchanged (the stream still advances so counters stay
    aligned across base processes).
    """
    if lam_eff < 0:
        raise ValueError("effective mean must be non-negative")
    if model.base_process == "deterministic_trace":
        rng.skip()
        return float(lam_eff)
    return float(rng.poisson(lam_eff))


def drift_threshold(g: GoodwillState = GoodwillState()) -> float:
    """No-stockout probability above which goodwill has non-negative log-drift."""
    if not (0.0 < g.drop < 1.0 < g.recover):
        raise ValueError("requires 0 < drop < 1 < recover")
    up = math.log(1.0 / g.drop)
    return up / (up + math.log(g.recover))


# --------------------------------------------------------------------------
# External trace selection

@dataclass(frozen=True)
class TraceWindow:
    series_id: str
    start: int
    values: tuple[float, ...]
    cv: float


def select_trace_window(
    panel: Mapping[str, Sequence[float]],
    window: int,
    target_mean: float = 20.0,
    min_activity: float = 0.9,
) -> DemandModel:
    """Pick the most volatile admissible window from a sales panel and
    rescale it to the benchmark mean.

    A window is admissible when at least ``min_activity`` of its periods have
    nonzero sales. Among admissible windows the one with the highest
    coefficient of variation wins; ties break on (series_id, start) for
    determinism.
    """
    if not panel:
        raise ValueError("empty panel")
    best: TraceWindow | None = None
    for series_id in sorted(panel):
        series = [float(v) for v in panel[series_id]]
        if len(series) < window:
            continue
        for start in range(len(series) - window + 1):
            vals = series[start:start + window]
            nonzero = sum(1 for v in vals if v > 0)
            if nonzero < min_activity * window:
                continue
            mean = sum(vals) / window
            if mean <= 0:
                continue
            var = sum((v - mean) ** 2 for v in vals) / window
            cv = math.sqrt(var) / mean
            cand = TraceWindow(series_id, start, tuple(vals), cv)
            if best is None or cand.cv > best.cv:
                best = cand
    if best is None:
        raise ValueError("no series passes the activity filter")
    mean = sum(best.values) / window
    scaled = tuple(v * target_mean / mean for v in best.values)
    return DemandModel(base_mean=target_mean, base_process="deterministic_trace",
                       trace=scaled)


def load_trace_table(text: str) -> dict[str, list[float]]:
    """Parse delimited trace text with a (series_id, t, units) header into a panel."""
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty trace table")
    sep = "," if "," in lines[0] else None
    header = [h.strip() for h in (lines[0].split(sep))]
    expected = ["series_id", "t", "units"]
    if [h.lower() for h in header] != expected:
        raise ValueError(f"trace header must be {expected}, got {header}")
    rows: dict[str, list[tuple[int, float]]] = {}
    for ln in lines[1:]:
        sid, t, units = [p.strip() for p in ln.split(sep)]
        rows.setdefault(sid, []).append((int(t), float(units)))
    panel = {}
    for sid, pairs in rows.items():
        pairs.sort()
        panel[sid] = [u for _, u in pairs]
    return panel
