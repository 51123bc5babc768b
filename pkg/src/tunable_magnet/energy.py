"""
Coil current pulses and their resistive heat. Only i^2 R losses count; inductive energy returns to the supply.

A pulse ramps the applied field linearly from zero to its peak at the slew rate, optionally holds, and ramps back.
"""

from __future__ import annotations
import dataclasses
from typing import Any

from .errors import ValidationError
from .tuning import TuningPlan


@dataclasses.dataclass(frozen=True)
class CoilParams:
    n_turns: int = 500
    resistance: float = 2.0
    """ohm"""
    l_m: float = 0.01
    """Magnetic path length through the soft magnet, m."""

    def __post_init__(self) -> None:
        if not (self.n_turns > 0 and self.resistance > 0 and self.l_m > 0):
            raise ValidationError(f"coil parameters must be positive: {self}")


@dataclasses.dataclass(frozen=True)
class PulseWaveform:
    shape: str = "triangular"
    slew: float = 5e6
    """Field slew rate, (A/m)/s."""
    hold: float = 0.0
    """Dwell at the peak, s."""

    def __post_init__(self) -> None:
        if self.shape != "triangular":
            raise ValidationError(f"unsupported pulse shape {self.shape!r}")
        if not self.slew > 0:
            raise ValidationError(f"slew must be positive, got {self.slew}")
        if not self.hold >= 0:
            raise ValidationError(f"hold must be non-negative, got {self.hold}")


@dataclasses.dataclass(frozen=True)
class Pulse:
    h_peak: float
    duration: float
    energy: float


@dataclasses.dataclass(frozen=True)
class EnergyReport:
    pulses: tuple[Pulse, ...]
    total: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "pulses": [{"h_peak": p.h_peak, "duration_s": p.duration, "energy_j": p.energy} for p in self.pulses],
            "total_j": self.total,
        }

    @staticmethod
    def from_dict(doc: dict[str, Any]) -> EnergyReport:
        pulses = tuple(Pulse(float(p["h_peak"]), float(p["duration_s"]), float(p["energy_j"])) for p in doc["pulses"])
        return EnergyReport(pulses=pulses, total=float(doc["total_j"]))


def current_for_field(h: float, coil: CoilParams) -> float:
    """Ampere's law around the magnet: N i = H l_m."""
    return h * coil.l_m / coil.n_turns


def pulse_duration(h_peak: float, wf: PulseWaveform) -> float:
    return 2 * abs(h_peak) / wf.slew + (wf.hold if h_peak != 0 else 0.0)


def pulse_energy(h_peak: float, wf: PulseWaveform, coil: CoilParams) -> float:
    """
    E = R i_peak^2 (T_ramp / 3 + hold), where T_ramp = 2 |h_peak| / slew is the up-plus-down ramp time;
    the integral of i^2 over a linear ramp is i_peak^2 times a third of its duration.
    """
    if h_peak == 0:
        return 0.0
    i_peak = current_for_field(h_peak, coil)
    t_ramp = 2 * abs(h_peak) / wf.slew
    return coil.resistance * i_peak**2 * (t_ramp / 3 + wf.hold)


def plan_energy(plan: TuningPlan, wf: PulseWaveform, coil: CoilParams) -> EnergyReport:
    """Every nonzero setpoint is a separate pulse from and back to zero field."""
    pulses = tuple(
        Pulse(h_peak=h, duration=pulse_duration(h, wf), energy=pulse_energy(h, wf, coil)) for h in plan.setpoints if h != 0
    )
    return EnergyReport(pulses=pulses, total=sum(p.energy for p in pulses))
