"""Monte-Carlo process and timing variation on top of the matchline model.

Each trial at Hamming distance ``d`` draws ``d`` per-cell conductance
multipliers (corner multiplier times a lognormal) and one jittered sampling
time, then asks the matchline model for a match decision. All randomness is
keyed on ``(seed, d, trial_index)`` through :mod:`hdcam.rng`, so curves are
bit-identical for any worker count or evaluation order.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from . import rng
from .matchline import MatchlineParams, decide, ml_voltage, nominal_mt

_TAG_CELL = 1
_TAG_JITTER = 2
_PREFIX_CELLS = 8  # cells drawn before the early-rejection bound


class UndefinedMetricError(ZeroDivisionError):
    pass


class UnboundedRegionError(ValueError):
    pass


@dataclass(frozen=True)
class Corner:
    name: str
    conductance_multiplier: float

    def __post_init__(self):
        if self.conductance_multiplier <= 0:
            raise ValueError("conductance multiplier must be positive")


TT = Corner("TT", 1.0)
FF = Corner("FF", 1.5)
SS = Corner("SS", 0.67)
CORNERS = {c.name: c for c in (TT, FF, SS)}


@dataclass(frozen=True)
class VariationSpec:
    corner: Corner = TT
    sigma_g: float = 0.1
    sigma_t: float = 0.0
    seed: int = 0
    trials: int = 1000

    def __post_init__(self):
        if self.sigma_g < 0 or self.sigma_t < 0:
            raise ValueError("sigma_g and sigma_t must be non-negative")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


def corner_params(params: MatchlineParams, corner: Corner) -> MatchlineParams:
    """Fold a corner's conductance multiplier into the law's time constant.

    The discharge depends on ``m * t / tau`` only, so scaling every cell's
    conductance by ``c`` is the same as dividing ``tau`` by ``c``.
    """
    if corner.conductance_multiplier == 1.0:
        return params
    law = replace(params.law, tau_ref=params.law.tau_ref / corner.conductance_multiplier)
    return replace(params, law=law)


def _sample_times(params: MatchlineParams, spec: VariationSpec, d: int, trials: np.ndarray) -> np.ndarray:
    if spec.sigma_t == 0:
        return np.full(trials.shape, params.t_eval)
    t = np.full(trials.shape, np.nan)
    pending = np.ones(trials.shape, dtype=bool)
    attempt = 0
    # resample non-positive draws; at 10 sigma this loop essentially never repeats
    while pending.any():
        z = rng.normal(spec.seed, _TAG_JITTER, d, trials[pending], attempt)
        draw = params.t_eval + spec.sigma_t * z
        idx = np.flatnonzero(pending)
        ok = draw > 0
        t[idx[ok]] = draw[ok]
        pending[idx[ok]] = False
        attempt += 1
    return t


def _effective_mismatch(spec: VariationSpec, d: int, trials: np.ndarray) -> np.ndarray:
    mult = spec.corner.conductance_multiplier
    if d == 0:
        return np.zeros(trials.shape)
    if spec.sigma_g == 0:
        return np.full(trials.shape, mult * d)
    z = rng.normal(spec.seed, _TAG_CELL, d, trials[:, None], np.arange(d)[None, :])
    return mult * np.exp(spec.sigma_g * z).sum(axis=1)


def trial_outcomes(params: MatchlineParams, spec: VariationSpec, d: int,
                   trial_indices: Sequence[int] | np.ndarray) -> np.ndarray:
    """Match decisions (bool array) for the given trials at distance ``d``."""
    if not 0 <= d <= params.word_bits:
        raise ValueError(f"distance {d} outside [0, {params.word_bits}]")
    trials = np.asarray(trial_indices, dtype=np.uint64)
    t = _sample_times(params, spec, d, trials)
    if spec.sigma_g == 0 or d <= _PREFIX_CELLS:
        m_eff = _effective_mismatch(spec, d, trials)
        return np.asarray(decide(ml_voltage(m_eff, params, t), params.v_evalth), dtype=bool)
    # Early rejection: the first few cells plus the hard lower bound on the
    # rest already rule out most far-away trials. The survivors are re-drawn
    # in full from the same counters, so decisions are unchanged.
    mult = spec.corner.conductance_multiplier
    z = rng.normal(spec.seed, _TAG_CELL, d, trials[:, None], np.arange(_PREFIX_CELLS)[None, :])
    floor = np.exp(spec.sigma_g * z).sum(axis=1) + (d - _PREFIX_CELLS) * np.exp(-spec.sigma_g * rng.NORMAL_BOUND)
    live = np.asarray(decide(ml_voltage(mult * floor * (1 - 1e-9), params, t), params.v_evalth), dtype=bool)
    out = np.zeros(trials.shape, dtype=bool)
    if live.any():
        m_eff = _effective_mismatch(spec, d, trials[live])
        out[live] = decide(ml_voltage(m_eff, params, t[live]), params.v_evalth)
    return out


def sample_trial(params: MatchlineParams, spec: VariationSpec, d: int, trial_index: int) -> bool:
    """One Monte-Carlo trial; True means Match."""
    return bool(trial_outcomes(params, spec, d, [trial_index])[0])


def guaranteed_mismatch(params: MatchlineParams, spec: VariationSpec, d: int) -> bool:
    """True when no draw at distance ``d`` can possibly produce a match.

    Uses the hard bound on the hashed normals, so skipping such rows gives
    exactly the same decisions as simulating them.
    """
    if d == 0:
        return False
    b = rng.NORMAL_BOUND
    m_min = spec.corner.conductance_multiplier * d * np.exp(-spec.sigma_g * b)
    t_min = params.t_eval - spec.sigma_t * b
    if t_min <= 0:
        return False
    return not decide(ml_voltage(m_min, params, t_min), params.v_evalth)


@dataclass(frozen=True)
class MatchCurve:
    d_values: tuple[int, ...]
    match_counts: tuple[int, ...]
    trial_count: int

    @property
    def probabilities(self) -> np.ndarray:
        return np.array(self.match_counts, dtype=np.float64) / self.trial_count

    def probability(self, d: int) -> float:
        return self.match_counts[self.d_values.index(d)] / self.trial_count

    @classmethod
    def from_probabilities(cls, d_values: Iterable[int], probs: Iterable[float], trial_count: int) -> "MatchCurve":
        counts = tuple(int(round(p * trial_count)) for p in probs)
        return cls(tuple(d_values), counts, trial_count)


def match_probability_curve(params: MatchlineParams, spec: VariationSpec, d_range: Iterable[int],
                            threads: int = 1) -> MatchCurve:
    ds = [int(d) for d in d_range]
    if not ds:
        raise ValueError("empty distance range")
    if ds != list(range(ds[0], ds[0] + len(ds))):
        raise ValueError("distance range must be contiguous and increasing")
    if ds[0] < 0 or ds[-1] > params.word_bits:
        raise ValueError(f"distances must lie in [0, {params.word_bits}]")
    trials = np.arange(spec.trials, dtype=np.uint64)

    def count(d: int) -> int:
        return int(trial_outcomes(params, spec, d, trials).sum())

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            counts = list(pool.map(count, ds))
    else:
        counts = [count(d) for d in ds]
    return MatchCurve(tuple(ds), tuple(counts), spec.trials)


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fn: int = 0
    tn: int = 0
    fp: int = 0

    def __post_init__(self):
        if min(self.tp, self.fn, self.tn, self.fp) < 0:
            raise ValueError("confusion counts must be non-negative")

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fn + other.fn,
                               self.tn + other.tn, self.fp + other.fp)

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.tn + self.fp


def sensitivity(counts: ConfusionCounts) -> float:
    if counts.tp + counts.fn == 0:
        raise UndefinedMetricError("sensitivity undefined: no expected-positive trials")
    return counts.tp / (counts.tp + counts.fn)


def specificity(counts: ConfusionCounts) -> float:
    if counts.tn + counts.fp == 0:
        raise UndefinedMetricError("specificity undefined: no expected-negative trials")
    return counts.tn / (counts.tn + counts.fp)


@dataclass(frozen=True)
class HdMetric:
    d: int
    label: str  # "sensitivity" or "specificity"
    value: float
    match_probability: float


def sens_spec_vs_hd(curve: MatchCurve, mt: int) -> list[HdMetric]:
    """Label each distance with the metric it contributes to.

    Distances up to and including ``mt`` are expected matches (sensitivity);
    distances above it are expected mismatches (specificity).
    """
    out = []
    for d, c in zip(curve.d_values, curve.match_counts):
        if d <= mt:
            counts = ConfusionCounts(tp=c, fn=curve.trial_count - c)
            out.append(HdMetric(d, "sensitivity", sensitivity(counts), c / curve.trial_count))
        else:
            counts = ConfusionCounts(tn=curve.trial_count - c, fp=c)
            out.append(HdMetric(d, "specificity", specificity(counts), c / curve.trial_count))
    return out


@dataclass(frozen=True)
class UncertaintyRegion:
    k_bound: int
    l_bound: int

    @property
    def width(self) -> int:
        return self.l_bound - self.k_bound - 1


def uncertainty_region(curve: MatchCurve) -> UncertaintyRegion:
    """Band between the last certain match and the first certain mismatch."""
    full = [d for d, c in zip(curve.d_values, curve.match_counts) if c == curve.trial_count]
    if not full:
        raise UnboundedRegionError("k side unbounded: no distance reaches match probability 1")
    k = max(full)
    empty = [d for d, c in zip(curve.d_values, curve.match_counts) if c == 0 and d > k]
    if not empty:
        raise UnboundedRegionError("l side unbounded: no distance above k reaches match probability 0")
    return UncertaintyRegion(k, min(empty))


@dataclass(frozen=True)
class Compensation:
    v_eval: float
    v_evalth: float
    achieved_mt: int
    target_mt: int
    params: MatchlineParams = field(repr=False)

    @property
    def error(self) -> int:
        return abs(self.achieved_mt - self.target_mt)


def corner_compensation(target_mt: int, corner: Corner, base: MatchlineParams,
                        v_evals: Iterable[float], v_evalths: Iterable[float]) -> Compensation:
    """Grid-search (v_eval, v_evalth) so the corner reproduces ``target_mt``.

    ``v_evalths`` are absolute volts. Ties go to the smaller v_eval, then
    the smaller v_evalth.
    """
    grid = [(float(ve), float(vt)) for ve in sorted(set(v_evals)) for vt in sorted(set(v_evalths))]
    if not grid:
        raise ValueError("empty compensation grid")
    best = None
    for ve, vt in grid:
        p = replace(base, v_eval=ve, v_evalth=vt)
        mt = nominal_mt(corner_params(p, corner))
        err = abs(mt - target_mt)
        if best is None or err < best[0]:
            best = (err, ve, vt, mt, p)
    _, ve, vt, mt, p = best
    return Compensation(ve, vt, mt, target_mt, p)
