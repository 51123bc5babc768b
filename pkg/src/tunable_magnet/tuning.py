"""
Magnetization-state (MS) tuning: plans of applied-field setpoints that move the soft magnet's remanence to a target.

Two planners are provided:

- SMST (saturating): an MS increase first saturates at +h_sat and then demagnetizes to a corner point on the
  descending major branch; a decrease only demagnetizes, relying on loop closure to rejoin the major branch.
  The corner point comes from a calibration that relates remanence to corner point on the major branch.
- EMST (envelope): a single excursion to a corner point on the reversal curve that starts from the current history,
  solved by bracketed bisection with secant refinement. It never saturates.

Planners are pure: they keep their own predicted history and never read the plant.
"""

from __future__ import annotations
import dataclasses
import enum
from logging import getLogger
from typing import Any, NamedTuple, Sequence
import numpy as np

from .errors import CalibrationError, RangeError, SolverError, UnreachableTargetError, ValidationError
from .hysteresis import HysteresisModel, MagnetState, MemoryStack, advance, apply_sequence, evaluate

DEFAULT_TOL_B = 1e-4
"""Default remanence tolerance of the corner-point solver [tesla]."""

EMST_FIELD_LIMIT = 0.999
"""EMST excursions stay within this fraction of h_sat."""

BISECTION_WIDTH = 1e-3
"""Bisection runs until the bracket is narrower than this fraction of h_sat, then secant steps take over."""

SECANT_STEPS = 5
_MAX_EXTRA_BISECTIONS = 200

_logger = getLogger(__name__)


class Method(str, enum.Enum):
    SMST = "smst"
    EMST = "emst"


class Branch(str, enum.Enum):
    DESCENDING_MAJOR = "descending-major"
    MINOR_REVERSAL = "minor-reversal"


@dataclasses.dataclass(frozen=True)
class CornerPoint:
    h_cp: float
    branch: Branch


@dataclasses.dataclass(frozen=True)
class TuningPlan:
    """
    Ordered field setpoints (the last one is always 0: the decay step), tagged with the method, the target,
    and what the planner expects the magnet to end up with.
    """

    method: Method
    setpoints: tuple[float, ...]
    target: float
    predicted_remanence: float
    predicted_history: MemoryStack

    def __post_init__(self) -> None:
        object.__setattr__(self, "setpoints", tuple(float(h) for h in self.setpoints))
        object.__setattr__(self, "method", Method(self.method))
        if not self.setpoints or self.setpoints[-1] != 0.0:
            raise ValidationError(f"the last setpoint must be exactly 0, got {self.setpoints}")

    @property
    def is_trivial(self) -> bool:
        return self.setpoints == (0.0,)

    @property
    def peak_field(self) -> float:
        return max(abs(h) for h in self.setpoints)

    def to_dict(self) -> dict[str, Any]:
        return {
            "method": self.method.value,
            "target": self.target,
            "setpoints": list(self.setpoints),
            "predicted_remanence": self.predicted_remanence,
            "predicted_history": list(self.predicted_history.extrema),
            "predicted_anchor": self.predicted_history.anchor,
        }

    @staticmethod
    def from_dict(doc: dict[str, Any]) -> TuningPlan:
        try:
            return TuningPlan(
                method=Method(doc["method"]),
                setpoints=tuple(doc["setpoints"]),
                target=float(doc["target"]),
                predicted_remanence=float(doc["predicted_remanence"]),
                predicted_history=MemoryStack(tuple(doc["predicted_history"]), int(doc["predicted_anchor"])),
            )
        except (KeyError, TypeError, ValueError) as ex:
            raise ValidationError(f"malformed plan record: {ex!r}") from ex


def check_target(model: HysteresisModel, b_target: float) -> float:
    b_target = float(b_target)
    if not np.isfinite(b_target) or abs(b_target) > model.b_r_max:
        raise RangeError(f"target {b_target} T is outside +-b_r_max = +-{model.b_r_max:.6g} T")
    return b_target


def _plan(method: Method, state: MagnetState, setpoints: Sequence[float], target: float) -> TuningPlan:
    end = apply_sequence(state, setpoints)
    return TuningPlan(
        method=method,
        setpoints=tuple(setpoints),
        target=target,
        predicted_remanence=end.b_now,
        predicted_history=end.stack,
    )


# ---------------------------------------------------------------------------------------------------------------------
# SMST


@dataclasses.dataclass(frozen=True)
class SmstCalibration:
    """
    Linear model h_cp = slope * b + intercept fitted by least squares over major-branch samples, plus the samples
    themselves. With ``piecewise`` set (the default) corner points are interpolated linearly between neighbouring
    samples instead of read off the single global line.
    """

    slope: float
    """A/m per T"""
    intercept: float
    """A/m"""
    fit_residual: float
    """RMS deviation of the sampled corner points from the line, A/m."""
    valid_range: tuple[float, float]
    knots_b: tuple[float, ...]
    knots_h: tuple[float, ...]
    piecewise: bool = True
    underdetermined: bool = False
    """Set for a two-point calibration: the line passes exactly through both samples, so the residual says nothing."""

    def corner_point(self, b_target: float) -> float:
        if self.piecewise:
            return float(np.interp(b_target, self.knots_b, self.knots_h))
        return self.slope * b_target + self.intercept

    def line_only(self) -> SmstCalibration:
        return dataclasses.replace(self, piecewise=False)


def smst_calibrate(model: HysteresisModel, n_samples: int = 201, *, piecewise: bool = True) -> SmstCalibration:
    """
    Samples corner points from 0 down to -h_sat on the descending major branch, evaluates the remanence reached
    from each, and fits the corner point as a linear function of remanence.
    """
    if n_samples < 2:
        raise CalibrationError(f"need at least 2 samples, got {n_samples}")
    if n_samples == 2:
        _logger.warning("Two-point SMST calibration: the fit residual is zero by construction")
    h_sat = model.h_sat
    top = MemoryStack((), +1)
    h = np.linspace(0.0, -h_sat, n_samples)
    b = np.array([evaluate(model, advance(advance(top, h_sat, x, h_sat), x, 0.0, h_sat), 0.0) for x in h])
    if np.ptp(b) <= 1e-9 * max(model.b_sat, 1e-300):
        raise CalibrationError("remanence does not vary with the corner point; the model is degenerate")
    slope, intercept = np.polyfit(b, h, 1)
    resid = h - (slope * b + intercept)
    fit_residual = float(np.sqrt(np.mean(resid**2)))
    # Knots for interpolation: ascending remanence; on ties keep the corner point nearest zero (least field).
    order = np.lexsort((-h, b))
    kb, kh = b[order], h[order]
    keep = np.concatenate([[True], np.diff(kb) > 0])
    return SmstCalibration(
        slope=float(slope),
        intercept=float(intercept),
        fit_residual=fit_residual,
        valid_range=(float(b.min()), float(b.max())),
        knots_b=tuple(float(x) for x in kb[keep]),
        knots_h=tuple(float(x) for x in kh[keep]),
        piecewise=piecewise,
        underdetermined=n_samples == 2,
    )


def smst_plan(b_target: float, state: MagnetState, cal: SmstCalibration) -> TuningPlan:
    """
    Up-step (target above the current remanence): [+h_sat, h_cp, 0]. Down-step: [h_cp, 0]. Equal: [0].
    ``state`` is the planner's own view of the magnet.
    """
    model = state.model
    b_target = check_target(model, b_target)
    lo, hi = cal.valid_range
    if not lo - 1e-12 <= b_target <= hi + 1e-12:
        raise RangeError(f"target {b_target} T is outside the calibrated range [{lo:.6g}, {hi:.6g}] T")
    current = state.remanence
    if b_target == current:
        return _plan(Method.SMST, state, (0.0,), b_target)
    h_cp = min(max(cal.corner_point(b_target), -model.h_sat), 0.0)
    if b_target > current:
        setpoints: tuple[float, ...] = (model.h_sat, h_cp, 0.0)
    else:
        setpoints = (h_cp, 0.0)
    return _plan(Method.SMST, state, setpoints, b_target)


# ---------------------------------------------------------------------------------------------------------------------
# EMST


def _excursion_remanence(model: HysteresisModel, stack: MemoryStack, h_now: float, h_cp: float) -> float:
    h_sat = model.h_sat
    s = advance(stack, h_now, h_cp, h_sat)
    return evaluate(model, advance(s, h_cp, 0.0, h_sat), 0.0)


def reachable_interval(model: HysteresisModel, stack: MemoryStack, h_now: float) -> tuple[float, float]:
    """Remanence range an EMST excursion can reach from the given history without saturating."""
    h_lim = EMST_FIELD_LIMIT * model.h_sat
    return (
        _excursion_remanence(model, stack, h_now, -h_lim),
        _excursion_remanence(model, stack, h_now, h_lim),
    )


def solve_corner_point(
    b_target: float,
    stack: MemoryStack,
    h_now: float,
    model: HysteresisModel,
    tol_b: float = DEFAULT_TOL_B,
) -> CornerPoint:
    """
    Finds h_cp such that the excursion h_now -> h_cp -> 0 leaves a remanence within ``tol_b`` of the target.
    The remanence is nondecreasing in h_cp for a fixed history, so the bracket [h_now, +limit] (or [-limit, h_now])
    is valid. Bisection narrows it to BISECTION_WIDTH * h_sat, then up to SECANT_STEPS safeguarded secant steps
    refine; if those do not converge (kinks at wiping-out boundaries), bisection resumes.
    """
    if not tol_b > 0:
        raise ValidationError(f"tol_b must be positive, got {tol_b}")
    b_target = check_target(model, b_target)
    h_sat = model.h_sat
    stack.validate(h_sat)

    def branch(h: float) -> Branch:
        return Branch.DESCENDING_MAJOR if stack.is_major and stack.anchor > 0 and h <= h_now else Branch.MINOR_REVERSAL

    def r(h: float) -> float:
        return _excursion_remanence(model, stack, h_now, h)

    r_now = r(h_now)
    if abs(r_now - b_target) <= tol_b:
        return CornerPoint(h_now, branch(h_now))

    h_lim = EMST_FIELD_LIMIT * h_sat
    if b_target > r_now:
        lo, hi = h_now, h_lim
        r_lo, r_hi = r_now, r(hi)
        if r_hi < b_target - tol_b:
            raise UnreachableTargetError(
                f"target {b_target} T is above the reachable remanence {r_hi:.6g} T for this history",
                reachable=(r(-h_lim), r_hi),
            )
    else:
        lo, hi = -h_lim, h_now
        r_lo, r_hi = r(lo), r_now
        if r_lo > b_target + tol_b:
            raise UnreachableTargetError(
                f"target {b_target} T is below the reachable remanence {r_lo:.6g} T for this history",
                reachable=(r_lo, r(h_lim)),
            )
    for h, rr in ((lo, r_lo), (hi, r_hi)):
        if abs(rr - b_target) <= tol_b:
            return CornerPoint(h, branch(h))

    def narrow(h: float) -> float | None:
        nonlocal lo, hi, r_lo, r_hi
        rr = r(h)
        if abs(rr - b_target) <= tol_b:
            return h
        if rr < b_target:
            lo, r_lo = h, rr
        else:
            hi, r_hi = h, rr
        return None

    while hi - lo > BISECTION_WIDTH * h_sat:
        if (found := narrow(0.5 * (lo + hi))) is not None:
            return CornerPoint(found, branch(found))
    for _ in range(SECANT_STEPS):
        if r_hi > r_lo:
            h = lo + (b_target - r_lo) * (hi - lo) / (r_hi - r_lo)
        else:
            h = 0.5 * (lo + hi)
        if not lo < h < hi:
            h = 0.5 * (lo + hi)
        if (found := narrow(h)) is not None:
            return CornerPoint(found, branch(found))
    for _ in range(_MAX_EXTRA_BISECTIONS):
        if (found := narrow(0.5 * (lo + hi))) is not None:
            return CornerPoint(found, branch(found))
        if hi - lo <= 1e-12 * h_sat:
            break
    if r_hi < r_lo:
        raise SolverError("remanence is not monotone in the corner point; the model is pathological")
    raise SolverError(
        f"no corner point within tol_b={tol_b} T: remanence jumps from {r_lo:.9g} to {r_hi:.9g} T "
        f"across [{lo:.9g}, {hi:.9g}] A/m"
    )


def emst_plan(b_target: float, state: MagnetState, model: HysteresisModel | None = None, tol_b: float = DEFAULT_TOL_B) -> TuningPlan:
    """
    Single-excursion plan [h_cp, 0] from the planner's predicted history; a target within tol_b of the current
    remanence yields the trivial plan [0]. No setpoint ever reaches h_sat.
    """
    model = model if model is not None else state.model
    if state.model is not model:
        state = MagnetState.at(model, state.stack, state.h_now)
    b_target = check_target(model, b_target)
    if state.h_now == 0.0 and b_target == state.b_now:
        return _plan(Method.EMST, state, (0.0,), b_target)
    cp = solve_corner_point(b_target, state.stack, state.h_now, model, tol_b)
    setpoints = (0.0,) if cp.h_cp == 0.0 else (cp.h_cp, 0.0)
    plan = _plan(Method.EMST, state, setpoints, b_target)
    assert plan.peak_field < model.h_sat, plan
    return plan


# ---------------------------------------------------------------------------------------------------------------------
# Execution


class Execution(NamedTuple):
    state: MagnetState
    achieved: float
    error: float


def execute_plan(plan: TuningPlan, plant: MagnetState) -> Execution:
    """
    Applies the setpoints to the plant, which may be a different model than the planner's.
    Returns the plant's new state, the reached remanence, and the signed error against the plan's target.
    """
    end = apply_sequence(plant, plan.setpoints)
    return Execution(state=end, achieved=end.b_now, error=end.b_now - plan.target)


def planner_state_after(plan: TuningPlan, model: HysteresisModel) -> MagnetState:
    """The planner's own view of the magnet once the plan has run."""
    return MagnetState(model=model, h_now=0.0, stack=plan.predicted_history, b_now=plan.predicted_remanence)


def demagnetizing_fields(model: HysteresisModel, b_remanent: float = 0.0, tol_b: float = DEFAULT_TOL_B) -> tuple[float, ...]:
    """
    Field history that brings a magnet with unknown past to the given remanence on the major-branch history:
    saturate positively, then demagnetize to the exact corner point and relax.
    """
    top = MagnetState.saturated(model, +1)
    cp = solve_corner_point(b_remanent, top.stack, top.h_now, model, tol_b)
    return (model.h_sat, cp.h_cp, 0.0) if cp.h_cp != 0.0 else (model.h_sat, 0.0)


def demagnetized_state(model: HysteresisModel, b_remanent: float = 0.0, tol_b: float = DEFAULT_TOL_B) -> MagnetState:
    start = MagnetState.saturated(model, -1, relaxed=False)
    return apply_sequence(start, demagnetizing_fields(model, b_remanent, tol_b))
