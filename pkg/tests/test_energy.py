from __future__ import annotations
import numpy as np
from scipy.integrate import trapezoid
import pytest

from tunable_magnet.energy import (
    CoilParams,
    EnergyReport,
    PulseWaveform,
    current_for_field,
    plan_energy,
    pulse_duration,
    pulse_energy,
)
from tunable_magnet.errors import ValidationError
from tunable_magnet.hysteresis import MemoryStack
from tunable_magnet.tuning import Method, TuningPlan

H_SAT = 500e3


def trapezoid_energy(h_peak: float, wf: PulseWaveform, coil: CoilParams, n: int = 1_000_000) -> float:
    """Integrate R i(t)^2 over a sampled ramp-hold-ramp waveform."""
    t_up = abs(h_peak) / wf.slew
    total = 2 * t_up + wf.hold
    t = np.linspace(0.0, total, n + 1)
    h = np.minimum.reduce([wf.slew * t, np.full_like(t, abs(h_peak)), wf.slew * (total - t)])
    i = h * coil.l_m / coil.n_turns
    return float(coil.resistance * trapezoid(i**2, t))


class TestPulse:
    @pytest.mark.parametrize("h_peak", [H_SAT, -2.3e5, 1e3])
    @pytest.mark.parametrize("hold", [0.0, 0.02])
    def test_matches_numerical_integral(self, h_peak: float, hold: float) -> None:
        wf, coil = PulseWaveform(hold=hold), CoilParams()
        assert pulse_energy(h_peak, wf, coil) == pytest.approx(trapezoid_energy(h_peak, wf, coil), rel=1e-9)

    def test_cubic_in_amplitude_without_hold(self) -> None:
        wf, coil = PulseWaveform(), CoilParams()
        e1, e2 = pulse_energy(1e5, wf, coil), pulse_energy(2e5, wf, coil)
        assert e2 / e1 == pytest.approx(8.0, rel=1e-12)

    def test_sign_symmetric(self) -> None:
        wf, coil = PulseWaveform(hold=0.01), CoilParams()
        assert pulse_energy(-3e5, wf, coil) == pulse_energy(3e5, wf, coil)

    def test_saturation_current(self) -> None:
        assert current_for_field(H_SAT, CoilParams()) == pytest.approx(10.0)

    def test_zero_pulse_is_free(self) -> None:
        wf = PulseWaveform(hold=1.0)
        assert pulse_energy(0.0, wf, CoilParams()) == 0.0
        assert pulse_duration(0.0, wf) == 0.0

    def test_duration(self) -> None:
        assert pulse_duration(-2.5e5, PulseWaveform(slew=5e6, hold=0.1)) == pytest.approx(0.2)


class TestPlanEnergy:
    def test_pulses_add(self) -> None:
        wf, coil = PulseWaveform(), CoilParams()
        plan = TuningPlan(Method.SMST, (H_SAT, -1.5e5, 0.0), 0.5, -0.2, MemoryStack((-1.5e5,), +1))
        report = plan_energy(plan, wf, coil)
        assert len(report.pulses) == 2
        assert report.total == pytest.approx(pulse_energy(H_SAT, wf, coil) + pulse_energy(-1.5e5, wf, coil), rel=1e-15)

    def test_trivial_plan_costs_nothing(self) -> None:
        plan = TuningPlan(Method.EMST, (0.0,), 0.1, 0.1, MemoryStack())
        report = plan_energy(plan, PulseWaveform(), CoilParams())
        assert report.pulses == () and report.total == 0.0

    def test_report_round_trip(self) -> None:
        plan = TuningPlan(Method.EMST, (2e5, 0.0), 0.3, 0.1, MemoryStack((2e5,), -1))
        report = plan_energy(plan, PulseWaveform(hold=0.01), CoilParams())
        assert EnergyReport.from_dict(report.to_dict()) == report


class TestValidation:
    @pytest.mark.parametrize(
        "kwargs", [{"n_turns": 0}, {"resistance": -1.0}, {"l_m": 0.0}, {"resistance": float("nan")}]
    )
    def test_coil(self, kwargs: dict[str, float]) -> None:
        with pytest.raises(ValidationError):
            CoilParams(**kwargs)  # type: ignore[arg-type]

    @pytest.mark.parametrize("kwargs", [{"shape": "square"}, {"slew": 0.0}, {"hold": -1e-3}])
    def test_waveform(self, kwargs: dict[str, object]) -> None:
        with pytest.raises(ValidationError):
            PulseWaveform(**kwargs)  # type: ignore[arg-type]
