"""Behavioral matchline model.

A row's matchline is precharged to ``v_dd`` and then discharged through every
mismatching cell, each throttled by the evaluation transistor gated at
``v_eval``. The model answers one question: what voltage does the sense
amplifier see at ``t_eval``, and is that above ``v_evalth``?

The default discharge law is a stretched exponential in the product
``m * t``::

    V(m, t) = v_dd * exp(-(m * t / tau) ** beta)

with ``tau`` growing linearly with word width (matchline capacitance) and
shrinking exponentially with ``v_eval`` (gate drive). ``tau`` and ``beta``
are fit to the published mismatch-threshold vs. ``v_evalth`` table.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

V_DD = 1.2
T_EVAL = 1e-9
PRECHARGE_TIME = 1e-9
EXACT_MODE_MARGIN = 1e-3

STRETCHED_EXPONENTIAL = "stretched_exponential"
LINEAR_CURRENT = "linear_current"
USER_TABLE = "user_table"
LAW_KINDS = (STRETCHED_EXPONENTIAL, LINEAR_CURRENT, USER_TABLE)

# (v_evalth as a fraction of v_dd, mismatch threshold in bits), 256-bit word
PUBLISHED_MT_TABLE: tuple[tuple[float, int], ...] = (
    (0.90, 13), (0.85, 18), (0.80, 24), (0.75, 30), (0.70, 37), (0.65, 43),
    (0.60, 49), (0.55, 56), (0.50, 63), (0.45, 70), (0.40, 78), (0.35, 86),
    (0.30, 95), (0.25, 108), (0.20, 127), (0.15, 155),
)

# log-log least squares over PUBLISHED_MT_TABLE at v_eval = 0.60 V, 256 bits, t_eval = 1 ns
CALIBRATED_TAU_REF = 8.501716784180604e-08
CALIBRATED_BETA = 1.1935008007126333


class ModelError(ValueError):
    pass


class OutOfModelError(ModelError):
    pass


@dataclass(frozen=True)
class DischargeLaw:
    kind: str = STRETCHED_EXPONENTIAL
    tau_ref: float = CALIBRATED_TAU_REF
    beta: float = CALIBRATED_BETA
    v_eval_ref: float = 0.60
    slope_s: float = 0.12
    cap_ref_bits: int = 256
    # user_table only: (dose, V/v_dd) samples with dose = m * t / tau
    table: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.kind not in LAW_KINDS:
            raise ModelError(f"unknown discharge law {self.kind!r}")
        if not (self.tau_ref > 0 and self.beta > 0 and self.slope_s > 0):
            raise ModelError("tau_ref, beta and slope_s must be positive")
        if self.cap_ref_bits <= 0:
            raise ModelError("cap_ref_bits must be positive")
        if self.kind == USER_TABLE:
            if len(self.table) < 2:
                raise ModelError("user_table law needs at least two samples")
            doses = [p[0] for p in self.table]
            levels = [p[1] for p in self.table]
            if doses[0] != 0 or levels[0] != 1.0:
                raise ModelError("user table must start at (0, 1.0)")
            if any(b <= a for a, b in zip(doses, doses[1:])):
                raise ModelError("user table doses must be strictly increasing")
            if any(b >= a for a, b in zip(levels, levels[1:])):
                raise ModelError("user table levels must be strictly decreasing")
            if levels[-1] < 0:
                raise ModelError("user table levels must be non-negative")

    def tau(self, word_bits: int, v_eval: float) -> float:
        """Effective time constant for a word width and gate drive."""
        return (self.tau_ref * word_bits / self.cap_ref_bits
                * math.exp(-(v_eval - self.v_eval_ref) / self.slope_s))

    def level(self, dose):
        """Fraction of v_dd left on the line after a dose ``m * t / tau``."""
        dose = np.asarray(dose, dtype=np.float64)
        if self.kind == STRETCHED_EXPONENTIAL:
            return np.exp(-(dose ** self.beta))
        if self.kind == LINEAR_CURRENT:
            return np.clip(1.0 - dose, 0.0, 1.0)
        xs, ys = zip(*self.table)
        tail_slope = (ys[-1] - ys[-2]) / (xs[-1] - xs[-2])
        out = np.interp(dose, xs, ys)
        beyond = dose > xs[-1]
        # keep strictly decreasing past the last sample, floor at 0
        return np.where(beyond, np.maximum(ys[-1] + tail_slope * (dose - xs[-1]), 0.0), out)


@dataclass(frozen=True)
class MatchlineParams:
    v_eval: float
    v_evalth: float
    v_dd: float = V_DD
    t_eval: float = T_EVAL
    precharge_time: float = PRECHARGE_TIME
    word_bits: int = 256
    law: DischargeLaw = field(default_factory=DischargeLaw)

    def __post_init__(self):
        if not 0 < self.v_evalth < self.v_dd:
            raise ModelError(f"need 0 < v_evalth < v_dd, got v_evalth={self.v_evalth}")
        if not 0 < self.v_eval <= self.v_dd:
            raise ModelError(f"need 0 < v_eval <= v_dd, got v_eval={self.v_eval}")
        if not (self.t_eval > 0 and self.precharge_time > 0):
            raise ModelError("t_eval and precharge_time must be positive")
        if self.word_bits <= 0 or self.word_bits % 8:
            raise ModelError(f"word_bits must be a positive multiple of 8, got {self.word_bits}")

    @property
    def exact_mode(self) -> bool:
        return self.v_eval >= self.v_dd - EXACT_MODE_MARGIN

    @property
    def tau(self) -> float:
        return self.law.tau(self.word_bits, self.v_eval)

    def with_threshold_fraction(self, fraction: float) -> "MatchlineParams":
        return replace(self, v_evalth=fraction * self.v_dd)

    def replace(self, **changes) -> "MatchlineParams":
        return replace(self, **changes)


def ml_voltage(m_eff, params: MatchlineParams, t):
    """Matchline voltage after discharging for ``t`` seconds.

    ``m_eff`` is the summed conductance weight of the mismatching cells (an
    integer mismatch count in the variation-free case). Scalars in, float
    out; arrays broadcast.
    """
    m = np.asarray(m_eff, dtype=np.float64)
    tt = np.asarray(t, dtype=np.float64)
    if np.any(m < 0) or np.any(tt < 0):
        raise ModelError("m_eff and t must be non-negative")
    if params.exact_mode:
        v = np.where((m > 0) & (tt > 0), 0.0, params.v_dd)
    else:
        v = params.v_dd * params.law.level(m * tt / params.tau)
        v = np.where(m == 0, params.v_dd, v)
    return float(v) if v.ndim == 0 else v


def decide(v_ml, v_evalth: float):
    """True (Match) when the sampled voltage is at or above the threshold."""
    res = np.asarray(v_ml) >= v_evalth
    return bool(res) if res.ndim == 0 else res


def nominal_mt(params: MatchlineParams) -> int:
    """Largest mismatch count that still reads as a match at ``t_eval``.

    Capped at ``word_bits``.
    """
    def matches(m: int) -> bool:
        return decide(ml_voltage(m, params, params.t_eval), params.v_evalth)

    lo, hi = 0, params.word_bits
    if matches(hi):
        return hi
    # invariant: matches(lo), not matches(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if matches(mid):
            lo = mid
        else:
            hi = mid
    return lo


def continuous_mt(params: MatchlineParams) -> float:
    """Real-valued mismatch count where V(m, t_eval) crosses v_evalth.

    Only defined for the stretched-exponential law outside exact mode.
    """
    if params.exact_mode:
        return 0.0
    if params.law.kind != STRETCHED_EXPONENTIAL:
        raise ModelError("continuous_mt needs the stretched_exponential law")
    return (params.tau / params.t_eval) * math.log(params.v_dd / params.v_evalth) ** (1.0 / params.law.beta)


def threshold_for_mt(params: MatchlineParams, mt: int) -> MatchlineParams:
    """Set v_evalth midway between V(mt) and V(mt + 1) so nominal_mt == mt."""
    if params.exact_mode:
        if mt != 0:
            raise ModelError("exact-match mode only supports a threshold of 0")
        return params
    if not 0 <= mt < params.word_bits:
        raise ModelError(f"mt must lie in [0, {params.word_bits}), got {mt}")
    hi = ml_voltage(mt, params, params.t_eval)
    lo = ml_voltage(mt + 1, params, params.t_eval)
    if not hi > lo > 0:
        raise ModelError(f"mismatch threshold {mt} is not resolvable with these parameters")
    return replace(params, v_evalth=0.5 * (hi + lo))


@dataclass(frozen=True)
class CalibrationResult:
    law: DischargeLaw
    points: tuple[tuple[float, float], ...]
    model_mt: tuple[float, ...]
    residuals: tuple[float, ...]

    @property
    def max_abs_residual(self) -> float:
        return max(abs(r) for r in self.residuals)


def calibrate(mt_points: Sequence[tuple[float, float]], skeleton: MatchlineParams) -> CalibrationResult:
    """Fit (tau_ref, beta) to mismatch thresholds measured at several v_evalth.

    Inverting the stretched exponential at t_eval gives
    ``MT = (tau / t_eval) * ln(1 / x) ** (1 / beta)`` with ``x = v_evalth / v_dd``,
    which is a straight line in log-log coordinates. ``skeleton`` supplies the
    word width, v_eval and the law's reference anchors; the fitted ``tau`` is
    mapped back to the law's reference point.
    """
    pts = [(float(x), float(mt)) for x, mt in mt_points]
    if len(pts) < 2:
        raise ModelError("calibration needs at least two (threshold, MT) points")
    fracs = [p[0] for p in pts]
    if len(set(fracs)) != len(fracs):
        raise ModelError("calibration thresholds must be distinct")
    for x, mt in pts:
        if not 0 < x < 1:
            raise ModelError(f"threshold fraction {x} outside (0, 1)")
        if mt <= 0:
            raise ModelError(f"mismatch threshold must be positive, got {mt}")
    ordered = sorted(pts, key=lambda p: -p[0])
    if any(b[1] < a[1] for a, b in zip(ordered, ordered[1:])):
        raise ModelError("MT must not decrease as v_evalth decreases")

    x = np.array(fracs)
    mt = np.array([p[1] for p in pts])
    X = np.log(np.log(1.0 / x))
    Y = np.log(mt)
    slope, intercept = np.polyfit(X, Y, 1)
    if slope <= 0:
        raise ModelError("fit produced a non-positive exponent")
    beta = 1.0 / float(slope)
    tau_eff = math.exp(float(intercept)) * skeleton.t_eval

    base = skeleton.law
    tau_ref = (tau_eff * base.cap_ref_bits / skeleton.word_bits
               * math.exp((skeleton.v_eval - base.v_eval_ref) / base.slope_s))
    law = replace(base, kind=STRETCHED_EXPONENTIAL, tau_ref=tau_ref, beta=beta, table=())

    model = math.exp(intercept) * np.log(1.0 / x) ** slope
    residuals = (model - mt) / mt
    return CalibrationResult(law, tuple(pts), tuple(model.tolist()), tuple(residuals.tolist()))


@dataclass(frozen=True)
class EnergyTable:
    """Energy per bit per search (fJ) for a 256-bit word at the TT corner."""

    v_evals: tuple[float, ...]
    bits: tuple[int, ...]
    # energies[i][j] is at v_evals[i], bits[j]
    energies: tuple[tuple[float, ...], ...]
    exact_match_energy: float

    def __post_init__(self):
        if len(self.energies) != len(self.v_evals) or any(len(r) != len(self.bits) for r in self.energies):
            raise ModelError("energy grid shape does not match its axes")
        if list(self.v_evals) != sorted(set(self.v_evals)) or list(self.bits) != sorted(set(self.bits)):
            raise ModelError("energy table axes must be strictly increasing")

    def as_array(self) -> np.ndarray:
        return np.array(self.energies, dtype=np.float64)


PUBLISHED_ENERGY_TABLE = EnergyTable(
    v_evals=(0.4, 0.5, 0.6),
    bits=(1, 16, 32, 64, 96, 128),
    energies=(
        (0.406, 0.445, 0.486, 0.566, 0.643, 0.717),
        (0.408, 0.471, 0.530, 0.614, 0.688, 0.762),
        (0.413, 0.507, 0.545, 0.618, 0.692, 0.765),
    ),
    exact_match_energy=0.404,
)


def load_energy_table(path: str | Path | None = None) -> EnergyTable:
    """Read an energy table CSV; defaults to the copy shipped in the package.

    Rows are ``v_eval,mismatching_bits,fj_per_bit``; one row with
    ``v_eval=exact`` holds the exact-match energy.
    """
    if path is None:
        text = resources.files("hdcam").joinpath("data/energy_table.csv").read_text()
    else:
        text = Path(path).read_text()
    grid: dict[tuple[float, int], float] = {}
    exact = None
    rows = [r for r in text.splitlines() if r.strip() and not r.startswith("#")]
    for rec in csv.DictReader(rows):
        if rec["v_eval"] == "exact":
            exact = float(rec["fj_per_bit"])
        else:
            grid[(float(rec["v_eval"]), int(rec["mismatching_bits"]))] = float(rec["fj_per_bit"])
    if exact is None:
        raise ModelError("energy table has no exact-match row")
    vs = tuple(sorted({k[0] for k in grid}))
    bs = tuple(sorted({k[1] for k in grid}))
    try:
        energies = tuple(tuple(grid[(v, b)] for b in bs) for v in vs)
    except KeyError as e:
        raise ModelError(f"energy table is missing grid point {e.args[0]}") from None
    return EnergyTable(vs, bs, energies, exact)


def energy_per_bit(v_eval: float, mismatching_bits: int, table: EnergyTable = PUBLISHED_ENERGY_TABLE,
                   v_dd: float = V_DD, word_bits: int = 256) -> float:
    """Bilinear lookup in the energy table, in femtojoules per bit per search.

    Mismatch counts outside the table's bit axis are clamped to its ends.
    """
    if not 0 <= mismatching_bits <= word_bits:
        raise ModelError(f"mismatching_bits must lie in [0, {word_bits}]")
    if v_eval >= v_dd - EXACT_MODE_MARGIN:
        return table.exact_match_energy
    vs = table.v_evals
    if not vs[0] - 1e-12 <= v_eval <= vs[-1] + 1e-12:
        raise OutOfModelError(
            f"v_eval={v_eval} V outside the characterized range [{vs[0]}, {vs[-1]}] V")
    grid = table.as_array()
    b = min(max(mismatching_bits, table.bits[0]), table.bits[-1])
    per_v = np.array([np.interp(b, table.bits, row) for row in grid])
    return float(np.interp(v_eval, vs, per_v))


def throughput(params: MatchlineParams, array_rows: int, word_bits: int | None = None) -> tuple[float, float]:
    """(searches per second, bit compares per second) for a pipelined array.

    Precharge of the next search overlaps sensing of the current one, so a
    search completes every ``precharge_time + t_eval``. Cycle time is rounded
    to whole femtoseconds so that round nanosecond figures come out exact.
    """
    if word_bits is None:
        word_bits = params.word_bits
    cycle_fs = round((params.precharge_time + params.t_eval) * 1e15)
    searches = 1e15 / cycle_fs
    return searches, searches * array_rows * word_bits
