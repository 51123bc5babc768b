"""
The nine acceptance criteria, each at its stated tolerance and runtime budget. Every test records a one-line
PASS/FAIL verdict that the terminal summary prints under "acceptance criteria".
"""

from __future__ import annotations
import time
from pathlib import Path
import numpy as np
import pytest
from scipy.constants import mu_0

from tunable_magnet.actuator import (
    HtmaGeometry,
    TmaGeometry,
    fit_piecewise_linear,
    force_htma,
    force_map,
    force_tma,
    solve_circuit_htma,
    solve_circuit_tma,
)
from tunable_magnet.bench import BenchConfig, emit_report, run_comparison
from tunable_magnet.hysteresis import (
    HysteresisModel,
    MagnetState,
    MemoryStack,
    apply_field,
    apply_sequence,
    evaluate,
    identify_from_forc,
    load_model,
    read_forc_csv,
    sample_forc,
    save_model,
    write_forc_csv,
)
from tunable_magnet.tuning import (
    demagnetized_state,
    emst_plan,
    execute_plan,
    reachable_interval,
    smst_calibrate,
    smst_plan,
)

from .oracles import HysteronGrid

GOLDEN = Path(__file__).parent / "golden"

# Pinned regression values from the first calibrated default run (seed 0).
PINNED_SMST_RMSE = 0.004800027715671096
PINNED_EMST_RMSE = 0.0064758231787768825
PINNED_ENERGY_RATIO = 0.1724782071431119


@pytest.fixture
def verdict(record_property):  # type: ignore[no-untyped-def]
    def record(cid: str, title: str, detail: str = "") -> None:
        record_property("criterion", cid)
        record_property("title", title)
        record_property("detail", detail)
        print(f"{cid}: {title} {detail}")

    return record


def _random_fields(rng: np.random.Generator, h_sat: float, n: int, sat_prob: float = 0.15) -> list[float]:
    out = []
    for _ in range(n):
        if rng.random() < sat_prob:
            out.append(float(rng.choice([-1.0, 1.0]) * h_sat * rng.uniform(1.0, 1.2)))
        else:
            out.append(float(rng.uniform(-0.98, 0.98) * h_sat))
    return out


def _state_key(s: MagnetState) -> tuple[MemoryStack, float]:
    return s.stack, s.h_now


# ---------------------------------------------------------------------------------------------------------------------


def test_ac1_hysteresis_properties(model: HysteresisModel, verdict) -> None:  # type: ignore[no-untyped-def]
    verdict("AC-1", "hysteresis properties over 1000 random sequences", "tol 1e-9*b_sat, < 10 s")
    rng = np.random.default_rng(101)
    h_sat, b_sat = model.h_sat, model.b_sat
    tol = 1e-9 * b_sat
    worst_closure = worst_congruency = 0.0
    t0 = time.perf_counter()
    start = MagnetState.saturated(model, -1, relaxed=False)
    for _ in range(1000):
        seq = _random_fields(rng, h_sat, int(rng.integers(1, 13)))
        state = start
        for h in seq:
            # bounds and monotone sweeps, checked on sub-steps
            prev, h0 = state.b_now, state.h_now
            direction = np.sign(h - h0)
            for frac in (0.25, 0.5, 0.75, 1.0):
                state = apply_field(state, h if frac == 1.0 else h0 + frac * (h - h0))
                assert abs(state.b_now) <= b_sat + 1e-9
                assert direction * (state.b_now - prev) >= -1e-12
                prev = state.b_now
        end = apply_sequence(start, seq)
        # rate independence: the sub-stepped run and a run with repeated setpoints match the plain one
        assert _state_key(state) == _state_key(end) and state.b_now == end.b_now
        doubled = apply_sequence(start, [h for h in seq for _ in (0, 1)])
        assert _state_key(doubled) == _state_key(end) and doubled.b_now == end.b_now

        # return-point memory: h1 -> h2 -> h1 closes when h1 becomes a reversal and h2 stays inside the
        # previous turning point (otherwise h2 wipes the loop it would close)
        h1 = float(rng.uniform(-0.95, 0.95) * h_sat)
        s1 = apply_field(end, h1)
        last = s1.stack.turning_points(h_sat)[-1]
        h2 = float(rng.uniform(min(h1, last), max(h1, last)))
        s3 = apply_sequence(s1, [h2, h1])
        worst_closure = max(worst_closure, abs(s3.b_now - s1.b_now))
        assert abs(s3.b_now - s1.b_now) <= tol

        # wiping out: a contained excursion (a, then b back toward p), followed by c beyond a, is forgotten
        p = s1.h_now
        d = 1.0 if rng.random() < 0.5 else -1.0
        room = 0.97 * h_sat - d * p
        if room > 1e-3 * h_sat:
            a = p + d * room * rng.uniform(0.2, 0.7)
            b = p + (a - p) * rng.uniform(0.1, 0.9)
            c = a + d * (0.97 * h_sat - d * a) * rng.uniform(0.1, 1.0)
            with_loop = apply_sequence(s1, [a, b, c])
            without = apply_field(s1, c)
            assert with_loop.stack == without.stack
            assert abs(with_loop.b_now - without.b_now) <= tol

        # congruency: the same minor loop (h_a < h_b) entered from two histories has the same swing
        h_a, h_b = sorted(rng.uniform(-0.9, 0.9, 2) * h_sat)
        h_top = float(rng.uniform(h_b / h_sat, 0.97) * h_sat)
        swings = []
        for origin in (end, apply_sequence(start, _random_fields(rng, h_sat, 5))):
            s = apply_sequence(origin, [h_top, h_a])
            lo_b = s.b_now
            s = apply_field(s, h_b)
            swings.append(s.b_now - lo_b)
        worst_congruency = max(worst_congruency, abs(swings[0] - swings[1]))
        assert abs(swings[0] - swings[1]) <= tol
    elapsed = time.perf_counter() - t0
    verdict(
        "AC-1",
        "hysteresis properties over 1000 random sequences",
        f"closure {worst_closure:.1e} T, congruency {worst_congruency:.1e} T, {elapsed:.1f} s",
    )
    assert elapsed < 10


def test_ac2_oracle_equivalence(model: HysteresisModel, oracle: HysteronGrid, verdict) -> None:  # type: ignore[no-untyped-def]
    verdict("AC-2", "Everett evaluation vs hysteron-grid oracle", "tol 1e-6*b_sat")
    t0 = time.perf_counter()
    rng = np.random.default_rng(202)
    worst = 0.0
    for _ in range(100):
        history = [oracle.snap(h) for h in rng.uniform(-1, 1, int(rng.integers(1, 9))) * model.h_sat]
        oracle.reset()
        state = MagnetState.saturated(model, -1, relaxed=False)
        for h in history:
            oracle.apply(h)
            state = apply_field(state, h)
            worst = max(worst, abs(oracle.b - state.b_now))
    elapsed = time.perf_counter() - t0
    verdict("AC-2", "Everett evaluation vs hysteron-grid oracle", f"max |dB| {worst:.2e} T, {elapsed:.1f} s after grid build")
    assert worst <= 1e-6 * model.b_sat
    assert elapsed < 60


def test_ac3_cp_solver(model: HysteresisModel, verdict) -> None:  # type: ignore[no-untyped-def]
    verdict("AC-3", "EMST corner-point solver on 1000 reachable targets", "|err| <= 0.1 mT, no saturation")
    t0 = time.perf_counter()
    rng = np.random.default_rng(303)
    start = demagnetized_state(model)
    worst = 0.0
    peak = 0.0
    for _ in range(1000):
        history = [float(h) for h in rng.uniform(-0.95, 0.95, int(rng.integers(0, 7))) * model.h_sat] + [0.0]
        state = apply_sequence(start, history)
        lo, hi = reachable_interval(model, state.stack, state.h_now)
        target = float(rng.uniform(lo, hi))
        plan = emst_plan(target, state)
        ex = execute_plan(plan, state)
        worst = max(worst, abs(ex.error))
        peak = max(peak, plan.peak_field)
    elapsed = time.perf_counter() - t0
    verdict(
        "AC-3",
        "EMST corner-point solver on 1000 reachable targets",
        f"max |err| {worst * 1e3:.4f} mT, max |h| {peak / model.h_sat:.4f} h_sat, {elapsed:.1f} s",
    )
    assert worst <= 1e-4
    assert peak < model.h_sat
    assert elapsed < 30


def test_ac4_smst_structure(model: HysteresisModel, verdict) -> None:  # type: ignore[no-untyped-def]
    verdict("AC-4", "SMST up-steps saturate first, down-steps never saturate")
    rng = np.random.default_rng(404)
    cal = smst_calibrate(model, 201)
    state = demagnetized_state(model)
    ups = downs = 0
    for target in rng.uniform(-1, 1, 200):
        current = state.remanence
        plan = smst_plan(float(target), state, cal)
        if target > current:
            ups += 1
            assert plan.setpoints[0] == model.h_sat
            assert apply_field(state, plan.setpoints[0]).stack == MemoryStack((), +1)
            assert plan.setpoints[1] <= 0
        else:
            downs += 1
            assert all(abs(h) < model.h_sat for h in plan.setpoints)
        state = execute_plan(plan, state).state
    verdict("AC-4", "SMST up-steps saturate first, down-steps never saturate", f"{ups} up-steps, {downs} down-steps")
    assert ups > 50 and downs > 50


@pytest.fixture(scope="module")
def default_report():  # type: ignore[no-untyped-def]
    t0 = time.perf_counter()
    report = run_comparison(BenchConfig())
    return report, time.perf_counter() - t0


def test_ac5_energy_ordering(default_report, verdict) -> None:  # type: ignore[no-untyped-def]
    report, _ = default_report
    verdict("AC-5", "EMST uses less energy per up-step and <= 0.5x on average")
    by_key = {(r.seq, r.step, r.method.value): r for r in report.steps}
    n_up = 0
    for (seq, step, method), r in by_key.items():
        if method == "smst" and r.up:
            n_up += 1
            assert by_key[(seq, step, "emst")].energy < r.energy
    ratio = report.energy_ratio
    verdict(
        "AC-5",
        "EMST uses less energy per up-step and <= 0.5x on average",
        f"{n_up} up-steps, ratio {ratio:.4f} (pinned {PINNED_ENERGY_RATIO:.4f})",
    )
    assert ratio <= 0.5
    assert ratio == pytest.approx(PINNED_ENERGY_RATIO, rel=1e-9)


def test_ac6_benchmark_protocol(default_report, verdict) -> None:  # type: ignore[no-untyped-def]
    report, elapsed = default_report
    verdict("AC-6", "benchmark protocol at the calibrated mismatch")
    assert report.smst.rmse == pytest.approx(4.8e-3, abs=0.8e-3)
    seeds = [run_comparison(BenchConfig(rng_seed=s)) for s in range(20)]
    med_smst = float(np.median([r.smst.rmse for r in seeds]))
    med_emst = float(np.median([r.emst.rmse for r in seeds]))
    verdict(
        "AC-6",
        "benchmark protocol at the calibrated mismatch",
        f"SMST {report.smst.rmse * 1e3:.2f} mT, EMST {report.emst.rmse * 1e3:.2f} mT, ratio {report.energy_ratio:.3f}, "
        f"20-seed medians {med_smst * 1e3:.2f}/{med_emst * 1e3:.2f} mT, {elapsed:.1f} s",
    )
    assert elapsed < 120
    assert med_emst >= med_smst
    assert all(r.emst.mean_e_tune < r.smst.mean_e_tune for r in seeds)
    assert report.smst.rmse == pytest.approx(PINNED_SMST_RMSE, rel=1e-9)
    assert report.emst.rmse == pytest.approx(PINNED_EMST_RMSE, rel=1e-9)
    assert emit_report(report, "table") == (GOLDEN / "bench_default_table.txt").read_text()


def test_ac7_htma_linearity(verdict) -> None:  # type: ignore[no-untyped-def]
    verdict("AC-7", "HTMA force linear in phi_tm, TMA quadratic")
    g = HtmaGeometry()
    xs = np.linspace(-g.x_range, g.x_range, 11)
    b_r = np.linspace(-1.0, 1.0, 21)
    rows = force_map(g, xs, b_r)
    arr = np.array(rows)
    min_r2 = 1.0
    for x in xs:
        m = arr[:, 0] == x
        phi, f = arr[m, 1], arr[m, 2]
        coef = np.polyfit(phi, f, 1)
        r2 = 1 - np.sum((f - np.polyval(coef, phi)) ** 2) / np.sum((f - f.mean()) ** 2)
        min_r2 = min(min_r2, r2)
    fit = fit_piecewise_linear(rows, 1)
    k_m = fit.segments[0].k_m
    worst_fd = 0.0
    step = 1e-6
    for x in xs:
        for br in b_r:
            a, b = solve_circuit_htma(g, br + step, x), solve_circuit_htma(g, br - step, x)
            fd = (force_htma(a, g) - force_htma(b, g)) / (a.phi_tm - b.phi_tm)
            worst_fd = max(worst_fd, abs(fd / k_m - 1))
    phi_b = solve_circuit_htma(g, 0.0, 0.0).phi_g1
    k_analytic = 2 * phi_b / (mu_0 * g.a_gap)
    dev_analytic = abs(k_m / k_analytic - 1)

    t = TmaGeometry()
    worst_quad = 0.0
    for x in xs:
        rows_t = force_map(t, [x], b_r)
        phi = np.array([r[1] for r in rows_t])
        f = np.array([r[2] for r in rows_t])
        coef = np.polyfit(phi, f, 2)
        worst_quad = max(worst_quad, float(np.linalg.norm(f - np.polyval(coef, phi)) / np.linalg.norm(f)))
        assert coef[0] > 0
    verdict(
        "AC-7",
        "HTMA force linear in phi_tm, TMA quadratic",
        f"min r2 {min_r2:.7f}, k_m vs FD {worst_fd * 100:.2f}%, vs analytic {dev_analytic * 100:.2f}%, "
        f"TMA quadratic residual {worst_quad:.1e}",
    )
    assert xs[-1] - xs[0] == pytest.approx(500e-6)
    assert min_r2 >= 0.999
    assert worst_fd <= 0.005
    assert dev_analytic <= 0.01
    assert worst_quad <= 1e-9


def test_ac8_coenergy_consistency(verdict) -> None:  # type: ignore[no-untyped-def]
    verdict("AC-8", "Maxwell-stress force equals co-energy derivative", "tol 0.1%")
    worst = 0.0
    t, g = TmaGeometry(), HtmaGeometry()
    d = 1e-8
    for x in np.linspace(-2.5e-4, 2.5e-4, 7):
        for b_r in (-1.0, -0.4, 0.3, 1.0):
            f = force_tma(solve_circuit_tma(t, b_r, x), t)
            dw = (solve_circuit_tma(t, b_r, x + d).coenergy - solve_circuit_tma(t, b_r, x - d).coenergy) / (2 * d)
            worst = max(worst, abs(dw - f) / abs(f))
            f = force_htma(solve_circuit_htma(g, b_r, x), g)
            dw = (solve_circuit_htma(g, b_r, x + d).coenergy - solve_circuit_htma(g, b_r, x - d).coenergy) / (2 * d)
            worst = max(worst, abs(dw - f) / abs(f))
    verdict("AC-8", "Maxwell-stress force equals co-energy derivative", f"max rel dev {worst:.1e}")
    assert worst <= 1e-3


def test_ac9_determinism_and_round_trip(model: HysteresisModel, tmp_path: Path, verdict) -> None:  # type: ignore[no-untyped-def]
    verdict("AC-9", "byte-identical reports, identify/simulate round trip", "tol 2e-3*b_sat")
    cfg = BenchConfig(n_sequences=5, rng_seed=7)
    for fmt in ("table", "csv", "json"):
        assert emit_report(run_comparison(cfg), fmt) == emit_report(run_comparison(cfg), fmt)

    h_sat = model.h_sat
    table = sample_forc(model, np.linspace(-h_sat, h_sat, 101), np.linspace(-h_sat, h_sat, 201))
    forc_path = tmp_path / "forc.csv"
    write_forc_csv(table, forc_path)
    ident = identify_from_forc(read_forc_csv(forc_path), 101)
    save_model(ident.model, tmp_path / "model.json")
    identified = load_model(tmp_path / "model.json")

    rng = np.random.default_rng(909)
    worst = 0.0
    for _ in range(1000):
        history = [float(h) for h in rng.uniform(-1.05, 1.05, int(rng.integers(1, 9))) * h_sat]
        h = float(rng.uniform(-1, 1) * h_sat)
        a = apply_sequence(MagnetState.saturated(model, -1, relaxed=False), history + [h])
        b = apply_sequence(MagnetState.saturated(identified, -1, relaxed=False), history + [h])
        assert a.stack == b.stack
        worst = max(worst, abs(a.b_now - evaluate(identified, b.stack, h)))
    verdict(
        "AC-9",
        "byte-identical reports, identify/simulate round trip",
        f"max |dB| {worst / model.b_sat:.2e} b_sat, clip fraction {ident.clip_fraction:.3f}",
    )
    assert worst <= 2e-3 * model.b_sat
