"""
``tunable-magnet`` command line.

Exit codes: 0 success, 1 validation error, 2 I/O error, 3 solver or internal error.
"""

from __future__ import annotations
import argparse
import csv
import io
import logging
import re
import sys
from pathlib import Path
from typing import Any, Callable, NoReturn, Sequence
import numpy as np
from scipy.constants import mu_0

from . import __version__
from ._io import csv_preamble, dumps_json, write_text
from .actuator import HtmaGeometry, fit_piecewise_linear, force_map, solve_circuit_htma
from .bench import emit_report, run_comparison
from .config import RunConfig, default_toml, load_config
from .energy import plan_energy
from .errors import FitError, SolverError, StateCorruptionError, TunableMagnetError, UnreachableTargetError, ValidationError
from .hysteresis import (
    MagnetState,
    apply_sequence,
    identify_from_forc,
    read_forc_csv,
    sample_forc,
    save_model,
    sweep_trace,
    write_forc_csv,
)
from .tuning import (
    Method,
    demagnetizing_fields,
    emst_plan,
    execute_plan,
    planner_state_after,
    smst_calibrate,
    smst_plan,
)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_INTERNAL = 3

_logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    """Usage errors are validation errors (exit 1), not argparse's default exit 2, which is reserved for I/O."""

    def error(self, message: str) -> NoReturn:
        raise ValidationError(f"{self.prog}: {message}")


def _float_list(text: str, what: str) -> list[float]:
    body = text.strip().strip("[]").strip()
    if not body:
        return []
    try:
        return [float(v) for v in body.split(",")]
    except ValueError as ex:
        raise ValidationError(f"{what}: {ex}") from ex


_INLINE = re.compile(r"[\s\[\]0-9eE+\-.,]*")


def read_sequence(spec: str) -> list[float]:
    """
    A field sequence given inline ("1e5,-2e5") or as a CSV file path: one value per row in the first column,
    optional ``h`` header, ``#`` comments. Errors name the offending line.
    """
    if _INLINE.fullmatch(spec):
        return _float_list(spec, "inline sequence")
    path = Path(spec)
    values = []
    with path.open(newline="") as f:
        for lineno, row in enumerate(csv.reader(f), start=1):
            if not row or not row[0].strip() or row[0].lstrip().startswith("#"):
                continue
            cell = row[0].strip()
            if lineno == 1 and cell.lower() in ("h", "h_a_per_m"):
                continue
            try:
                values.append(float(cell))
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: expected a field value in A/m, got {cell!r}") from None
    return values


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        write_text(out, text)


def _fresh_state(cfg: RunConfig, model: Any) -> MagnetState:
    start = MagnetState.saturated(model, -1, relaxed=False)
    return apply_sequence(start, demagnetizing_fields(model, 0.0, cfg.tuning.tol_b))


# ---------------------------------------------------------------------------------------------------------------------
# Commands


def cmd_simulate(cfg: RunConfig, sequence: list[float], out: Path | None) -> None:
    model = cfg.model()
    state = _fresh_state(cfg, model)
    buf = io.StringIO()
    buf.write(csv_preamble(cfg.to_dict()) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("step", "h", "b"))
    for step, h in enumerate(sequence):
        state, samples = sweep_trace(state, h, cfg.tuning.field_resolution)
        for hh, bb in samples:
            w.writerow((step, repr(hh), repr(bb)))
    _emit(buf.getvalue(), out)


def cmd_forc(cfg: RunConfig, curves: int, points: int, out: Path | None) -> None:
    model = cfg.model()
    h_sat = model.h_sat
    reversal = np.linspace(-h_sat, h_sat, curves)
    table = sample_forc(model, reversal, np.linspace(-h_sat, h_sat, points))
    buf = io.StringIO()
    write_forc_csv(table, buf, preamble=csv_preamble(cfg.to_dict()))
    _emit(buf.getvalue(), out)


def cmd_identify(forc: Path, grid: int, out: Path) -> None:
    table = read_forc_csv(forc)
    ident = identify_from_forc(table, grid)
    if ident.clip_fraction > 0:
        _logger.warning("clipped %.1f%% of negative Preisach weights", 100 * ident.clip_fraction)
    save_model(ident.model, out, config={"forc": str(forc), "grid": grid})


def cmd_tune(cfg: RunConfig, method: Method, targets: list[float], fallback: str, out: Path | None) -> None:
    planner = cfg.model()
    if cfg.tuning.plant_sigma > 0:
        rng = np.random.Generator(np.random.PCG64(cfg.tuning.plant_seed))
        plant_model = planner.with_perturbation(cfg.tuning.plant_sigma, rng)
    else:
        plant_model = planner
    cal = smst_calibrate(planner, cfg.tuning.smst_samples)
    fields = demagnetizing_fields(planner, 0.0, cfg.tuning.tol_b)
    state = apply_sequence(MagnetState.saturated(planner, -1, relaxed=False), fields)
    plant = apply_sequence(MagnetState.saturated(plant_model, -1, relaxed=False), fields)
    wf, coil = cfg.coil.waveform(), cfg.coil.coil()
    steps = []
    for k, target in enumerate(targets):
        used_fallback = False
        if method is Method.SMST:
            plan = smst_plan(target, state, cal)
        else:
            try:
                plan = emst_plan(target, state, tol_b=cfg.tuning.tol_b)
            except UnreachableTargetError:
                if fallback == "error":
                    raise
                plan = smst_plan(target, state, cal)
                used_fallback = True
        ex = execute_plan(plan, plant)
        plant = ex.state
        state = planner_state_after(plan, planner)
        energy = plan_energy(plan, wf, coil)
        steps.append(
            {
                "step": k,
                "plan": plan.to_dict(),
                "fallback": used_fallback,
                "achieved_t": ex.achieved,
                "error_t": ex.error,
                "energy": energy.to_dict(),
            }
        )
    doc = {
        "format_version": 1,
        "method": method.value,
        "steps": steps,
        "total_energy_j": sum(s["energy"]["total_j"] for s in steps),
    }
    _emit(dumps_json(doc, cfg.to_dict()), out)


def cmd_actuator(cfg: RunConfig, mode: str, positions: list[float], out: Path | None) -> dict[str, Any]:
    """
    Positions are travel coordinates in [0, 2 * x_range]; the emitted x_m is the centered circuit coordinate
    x = position - x_range (0 = mover centered, positive toward gap 1).
    """
    g = cfg.geometry
    travel = 2 * g.x_range
    for p in positions:
        if not -1e-15 <= p <= travel + 1e-15:
            raise ValidationError(f"position {p} m is outside the travel [0, {travel}] m")
    geom = g.htma() if mode == "htma" else g.tma()
    b_r = np.linspace(-cfg.magnet.b_r_max, cfg.magnet.b_r_max, g.b_r_points)
    rows = force_map(geom, [p - g.x_range for p in positions], b_r)
    buf = io.StringIO()
    buf.write(csv_preamble(cfg.to_dict()) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("x_m", "phi_tm_Wb", "force_N"))
    for x, phi, f in rows:
        w.writerow((repr(x), repr(phi), repr(f)))
    _emit(buf.getvalue(), out)

    per_position = []
    for x in sorted({r[0] for r in rows}):
        phi = np.array([r[1] for r in rows if r[0] == x])
        f = np.array([r[2] for r in rows if r[0] == x])
        slope, intercept = np.polyfit(phi, f, 1)
        ss_tot = float(np.sum((f - f.mean()) ** 2))
        r2 = 1 - float(np.sum((f - (slope * phi + intercept)) ** 2)) / ss_tot if ss_tot > 0 else 1.0
        per_position.append({"x_m": x, "slope_n_per_wb": float(slope), "intercept_n": float(intercept), "r2": r2})
    fit_doc: dict[str, Any] = {"format_version": 1, "mode": mode, "per_position": per_position}
    try:
        fit_doc["fit"] = fit_piecewise_linear(rows, g.fit_segments).to_dict() if rows else None
    except FitError as ex:
        fit_doc["fit"] = None
        fit_doc["fit_error"] = str(ex)
    if isinstance(geom, HtmaGeometry) and rows:
        phi_b = solve_circuit_htma(geom, 0.0, 0.0).phi_g1
        fit_doc["k_m_analytic"] = 2 * phi_b / (mu_0 * geom.a_eff)
    if out is not None:
        write_text(out.with_name(out.name + ".fit.json"), dumps_json(fit_doc, cfg.to_dict()))
    return fit_doc


def cmd_bench(cfg: RunConfig, seed: int | None, sequences: int | None, length: int | None, fmt: str, out: Path | None) -> None:
    overrides = {
        k: v for k, v in (("rng_seed", seed), ("n_sequences", sequences), ("seq_length", length)) if v is not None
    }
    report = run_comparison(cfg.bench_config(**overrides))
    _emit(emit_report(report, fmt), out)  # type: ignore[arg-type]


# ---------------------------------------------------------------------------------------------------------------------
# Entry point


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tunable-magnet", description="Hysteresis-aware magnetization tuning of a tunable magnet.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp: argparse.ArgumentParser, config: bool = True) -> None:
        if config:
            sp.add_argument("--config", type=Path, help="TOML run configuration (defaults when omitted)")
        sp.add_argument("--out", type=Path, help="output file (stdout when omitted)")

    sp = sub.add_parser("simulate", help="B(H) trace of a field sequence")
    common(sp)
    sp.add_argument("--sequence", required=True, help="CSV file or inline comma list of fields in A/m")

    sp = sub.add_parser("forc", help="sample first-order reversal curves from the configured model")
    common(sp)
    sp.add_argument("--curves", type=int, default=101)
    sp.add_argument("--points", type=int, default=201)

    sp = sub.add_parser("identify", help="identify an Everett-table model from FORC data")
    sp.add_argument("--forc", type=Path, required=True)
    sp.add_argument("--grid", type=int, default=101)
    sp.add_argument("--out", type=Path, required=True)

    sp = sub.add_parser("tune", help="plan and execute a sequence of remanence targets")
    common(sp)
    sp.add_argument("--method", choices=[m.value for m in Method], required=True)
    sp.add_argument("--targets", required=True, help="comma list of target remanences in T")
    sp.add_argument("--fallback", choices=["error", "smst"], default="smst")

    sp = sub.add_parser("actuator", help="force map and force-model fit")
    common(sp)
    sp.add_argument("--mode", choices=["tma", "htma"], required=True)
    sp.add_argument("--positions", required=True, help="comma list of travel positions in m, within [0, 2*x_range]")

    sp = sub.add_parser("bench", help="SMST/EMST comparison on random target sequences")
    common(sp)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--sequences", type=int)
    sp.add_argument("--length", type=int)
    sp.add_argument("--format", choices=["table", "csv", "json"], default="table")

    sp = sub.add_parser("config", help="print the default configuration")
    sp.add_argument("--out", type=Path)
    return p


def _dispatch(args: argparse.Namespace) -> None:
    if args.command == "identify":
        cmd_identify(args.forc, args.grid, args.out)
        return
    if args.command == "config":
        _emit(default_toml(), args.out)
        return
    cfg = load_config(args.config)
    commands: dict[str, Callable[[], Any]] = {
        "simulate": lambda: cmd_simulate(cfg, read_sequence(args.sequence), args.out),
        "forc": lambda: cmd_forc(cfg, args.curves, args.points, args.out),
        "tune": lambda: cmd_tune(cfg, Method(args.method), _float_list(args.targets, "--targets"), args.fallback, args.out),
        "actuator": lambda: cmd_actuator(cfg, args.mode, _float_list(args.positions, "--positions"), args.out),
        "bench": lambda: cmd_bench(cfg, args.seed, args.sequences, args.length, args.format, args.out),
    }
    commands[args.command]()


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except ValidationError as ex:
        print(f"error: {ex}", file=sys.stderr)
        return EXIT_VALIDATION
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        _dispatch(args)
    except ValidationError as ex:
        print(f"error: {ex}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as ex:
        print(f"I/O error: {ex}", file=sys.stderr)
        return EXIT_IO
    except (SolverError, StateCorruptionError, TunableMagnetError) as ex:
        print(f"internal error: {ex}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as ex:  # noqa: BLE001 - the exit-code contract covers every failure
        _logger.exception("unexpected failure")
        print(f"internal error: {ex!r}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
