"""
Return-point memory for the scalar Preisach model.

The history of the magnet is kept as a ``MemoryStack``: the sign of the last saturation (the anchor) plus the
surviving field reversals, dominant first. Together with the anchor at +-h_sat they form the turning-point
sequence p0 = anchor * h_sat, p1, p2, ... whose intervals are strictly nested:

    anchor = +1:   p1 < p3 < p5 < ... < p4 < p2 < p0 = +h_sat
    anchor = -1:   the mirror image

The current field moves away from the last turning point: upward if it is a minimum, downward if it is a maximum.
Reaching or passing the previous turning point of the same kind wipes the last pair out (loop closure).
"""

from __future__ import annotations
import dataclasses
import math
from typing import Iterable, Sequence

from ..errors import StateCorruptionError, ValidationError
from .everett import HysteresisModel


@dataclasses.dataclass(frozen=True)
class MemoryStack:
    extrema: tuple[float, ...] = ()
    anchor: int = -1
    """+1 if the history starts from positive saturation, -1 from negative saturation."""

    def __post_init__(self) -> None:
        object.__setattr__(self, "extrema", tuple(float(x) for x in self.extrema))

    def __len__(self) -> int:
        return len(self.extrema)

    @property
    def is_major(self) -> bool:
        return not self.extrema

    def turning_points(self, h_sat: float) -> list[float]:
        return [self.anchor * h_sat, *self.extrema]

    def direction(self, h_sat: float) -> int:
        """+1 if the current segment ascends (the last turning point is a minimum), -1 otherwise."""
        if not self.extrema:
            return -self.anchor
        prev = self.anchor * h_sat if len(self.extrema) == 1 else self.extrema[-2]
        return 1 if self.extrema[-1] < prev else -1

    def validate(self, h_sat: float) -> None:
        if self.anchor not in (-1, 1):
            raise StateCorruptionError(f"anchor must be +1 or -1, got {self.anchor}")
        p = self.turning_points(h_sat)
        for k, x in enumerate(self.extrema, start=1):
            if not (math.isfinite(x) and -h_sat < x < h_sat):
                raise StateCorruptionError(f"extremum #{k} = {x} is not strictly inside (-h_sat, h_sat)")
        for k in range(2, len(p)):
            lo, hi = sorted((p[k - 2], p[k - 1]))
            if not lo < p[k] < hi:
                raise StateCorruptionError(
                    f"turning point #{k} = {p[k]} violates alternation/dominance: must lie strictly in ({lo}, {hi})"
                )


def _wipe(extrema: list[float], h: float, direction: int) -> None:
    """Removes dominated (max, min) pairs in place; equality counts as exceeding (loop closure)."""
    if direction > 0:
        while len(extrema) >= 2 and h >= extrema[-2]:
            del extrema[-2:]
    else:
        while len(extrema) >= 2 and h <= extrema[-2]:
            del extrema[-2:]


def advance(stack: MemoryStack, h_now: float, h_target: float, h_sat: float) -> MemoryStack:
    """The stack after a monotone sweep from h_now to h_target."""
    if h_target >= h_sat:
        return MemoryStack((), +1)
    if h_target <= -h_sat:
        return MemoryStack((), -1)
    if h_target == h_now:
        return stack
    extrema = list(stack.extrema)
    heading = 1 if h_target > h_now else -1
    if heading != stack.direction(h_sat):
        if extrema and h_now == extrema[-1]:
            # Zero-length segment: the last turning point was never left, so it is not an extremum.
            extrema.pop()
        elif -h_sat < h_now < h_sat:
            extrema.append(h_now)
    _wipe(extrema, h_target, heading)
    return MemoryStack(tuple(extrema), stack.anchor)


def _canonical(stack: MemoryStack, h: float, h_sat: float) -> MemoryStack:
    """Applies wiping for a field that continues the current segment; rejects a field behind the last reversal."""
    if abs(h) >= h_sat:
        return MemoryStack((), 1 if h > 0 else -1)
    if not stack.extrema:
        return stack
    direction = stack.direction(h_sat)
    if (h - stack.extrema[-1]) * direction < 0:
        raise StateCorruptionError(
            f"field {h} lies behind the last reversal point {stack.extrema[-1]} of the current segment"
        )
    extrema = list(stack.extrema)
    _wipe(extrema, h, direction)
    return MemoryStack(tuple(extrema), stack.anchor)


def evaluate(model: HysteresisModel, stack: MemoryStack, h: float) -> float:
    """
    Flux density of the state (stack, h) by the Everett telescoping sum. Depends on nothing but the stack and h.
    """
    h_sat = model.h_sat
    stack.validate(h_sat)
    if not math.isfinite(h):
        raise ValidationError(f"field must be finite, got {h}")
    stack = _canonical(stack, h, h_sat)
    p = stack.turning_points(h_sat)
    p.append(min(max(h, -h_sat), h_sat))
    b = stack.anchor * model.b_irr_sat
    for prev, cur in zip(p, p[1:]):
        if cur > prev:
            b += model.everett(cur, prev)
        elif cur < prev:
            b -= model.everett(prev, cur)
    return b + model.chi_rev * p[-1]


def remanence(model: HysteresisModel, stack: MemoryStack, h_from: float) -> float:
    """Flux density after relaxing the state (stack, h_from) to zero field. Pure; nothing is mutated."""
    h_sat = model.h_sat
    stack.validate(h_sat)
    stack = _canonical(stack, h_from, h_sat)
    return evaluate(model, advance(stack, h_from, 0.0, h_sat), 0.0)


@dataclasses.dataclass(frozen=True)
class MagnetState:
    """
    The full hysteresis state of the soft magnet. ``b_now`` is always the model's evaluation of (stack, h_now).
    Use :meth:`at` to build one; states are values and operations return new instances.
    """

    model: HysteresisModel
    h_now: float
    stack: MemoryStack
    b_now: float

    @staticmethod
    def at(model: HysteresisModel, stack: MemoryStack, h: float) -> MagnetState:
        _check_field(model, h)
        b = evaluate(model, stack, h)
        return MagnetState(model=model, h_now=float(h), stack=_canonical(stack, h, model.h_sat), b_now=b)

    @staticmethod
    def saturated(model: HysteresisModel, sign: int = +1, *, relaxed: bool = True) -> MagnetState:
        """Saturated in the given direction, then (by default) relaxed to zero field."""
        if sign not in (-1, 1):
            raise ValidationError(f"sign must be +1 or -1, got {sign}")
        st = MagnetState.at(model, MemoryStack((), sign), sign * model.h_sat)
        return apply_field(st, 0.0) if relaxed else st

    @property
    def remanence(self) -> float:
        return remanence(self.model, self.stack, self.h_now)


def _check_field(model: HysteresisModel, h: float) -> None:
    if not math.isfinite(h) or abs(h) > model.h_clip:
        raise ValidationError(f"field {h} A/m is outside the clip limit +-{model.h_clip} A/m")


def apply_field(state: MagnetState, h_target: float) -> MagnetState:
    """
    Monotone sweep from the current field to ``h_target``. Wipes every stored extremum whose reach is met or
    exceeded, pushes the current field as a reversal when the direction changes, and empties the stack once
    |h_target| >= h_sat.
    """
    _check_field(state.model, h_target)
    h_target = float(h_target)
    if h_target == state.h_now:
        return state
    stack = advance(state.stack, state.h_now, h_target, state.model.h_sat)
    return MagnetState(
        model=state.model,
        h_now=h_target,
        stack=stack,
        b_now=evaluate(state.model, stack, h_target),
    )


def apply_sequence(state: MagnetState, fields: Iterable[float]) -> MagnetState:
    for h in fields:
        state = apply_field(state, h)
    return state


def stack_from_history(model: HysteresisModel, history: Sequence[float], start: MagnetState | None = None) -> MemoryStack:
    """Convenience: the stack left behind by a field history (starting from negative saturation by default)."""
    state = start if start is not None else MagnetState.saturated(model, -1, relaxed=False)
    return apply_sequence(state, history).stack


def sweep_trace(state: MagnetState, h_target: float, resolution: float) -> tuple[MagnetState, list[tuple[float, float]]]:
    """
    Sweeps to h_target in equal sub-steps no larger than ``resolution`` and returns the (h, b) samples
    after each sub-step. The final state is identical to a single :func:`apply_field` call.
    """
    if not resolution > 0:
        raise ValidationError(f"resolution must be positive, got {resolution}")
    _check_field(state.model, h_target)
    n = max(1, math.ceil(abs(h_target - state.h_now) / resolution))
    h0 = state.h_now
    samples = []
    for k in range(1, n + 1):
        h = h_target if k == n else h0 + (h_target - h0) * k / n
        state = apply_field(state, h)
        samples.append((state.h_now, state.b_now))
    return state, samples
