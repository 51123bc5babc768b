"""
Run configuration: a TOML document with ``format_version`` and the sections [magnet], [coil], [geometry], [tuning]
and [bench]. Missing keys take the defaults below; unknown keys are rejected.
"""

from __future__ import annotations
import dataclasses
import sys
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .bench import CALIBRATED_MISMATCH_SIGMA, BenchConfig
from .energy import CoilParams, PulseWaveform
from .errors import ValidationError
from .actuator import HtmaGeometry, TmaGeometry
from .hysteresis import HysteresisModel, MaterialParams, load_model
from .tuning import DEFAULT_TOL_B

FORMAT_VERSION = 1


@dataclasses.dataclass(frozen=True)
class CoilSection:
    n_turns: int = 500
    resistance: float = 2.0
    l_m: float = 0.01
    slew: float = 5e6
    hold: float = 0.0

    def __post_init__(self) -> None:
        self.coil()
        self.waveform()

    def coil(self) -> CoilParams:
        return CoilParams(n_turns=self.n_turns, resistance=self.resistance, l_m=self.l_m)

    def waveform(self) -> PulseWaveform:
        return PulseWaveform(slew=self.slew, hold=self.hold)


@dataclasses.dataclass(frozen=True)
class GeometrySection:
    a_gap: float = 1e-4
    g0: float = 0.5e-3
    l_m: float = 10e-3
    a_m: float = 1e-4
    mu_rec: float = 1.05
    n_gaps: int = 2
    fringing: float = 1.0
    b_r_bias: float = 1.2
    l_bias: float = 120e-3
    a_bias: float = 5e-5
    mu_rec_bias: float = 1.05
    x_range: float = 250e-6
    b_r_points: int = 21
    """Size of the b_r grid (over +-b_r_max) that sweeps phi_tm in force maps."""
    fit_segments: int = 1

    def __post_init__(self) -> None:
        self.htma()
        if self.b_r_points < 2 or self.fit_segments < 1:
            raise ValidationError("b_r_points must be >= 2 and fit_segments >= 1")

    def _fields(self, cls: type) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(cls)}

    def tma(self) -> TmaGeometry:
        return TmaGeometry(**self._fields(TmaGeometry))

    def htma(self) -> HtmaGeometry:
        return HtmaGeometry(**self._fields(HtmaGeometry))


@dataclasses.dataclass(frozen=True)
class TuningSection:
    tol_b: float = DEFAULT_TOL_B
    smst_samples: int = 201
    field_resolution: float = 10e3
    """Sweep sampling step of simulated traces, A/m."""
    model: str = ""
    """Path of a model file to use instead of the analytic material; relative to the config file."""
    plant_sigma: float = 0.0
    """Everett mismatch of the plant that ``tune`` executes against (0 = plant equals planner)."""
    plant_seed: int = 0

    def __post_init__(self) -> None:
        if not (self.tol_b > 0 and self.field_resolution > 0 and self.plant_sigma >= 0 and self.smst_samples >= 2):
            raise ValidationError(f"invalid [tuning] values: {self}")


@dataclasses.dataclass(frozen=True)
class BenchSection:
    n_sequences: int = 20
    seq_length: int = 10
    target_range: tuple[float, float] = (-1.0, 1.0)
    mismatch_sigma: float = CALIBRATED_MISMATCH_SIGMA
    rng_seed: int = 0
    planner_grid: int = 101


@dataclasses.dataclass(frozen=True)
class RunConfig:
    magnet: MaterialParams = MaterialParams()
    coil: CoilSection = CoilSection()
    geometry: GeometrySection = GeometrySection()
    tuning: TuningSection = TuningSection()
    bench: BenchSection = BenchSection()
    base_dir: Path = Path(".")
    """Directory that relative paths in the document resolve against (not part of the document)."""

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"format_version": FORMAT_VERSION}
        for f in dataclasses.fields(self):
            if f.name != "base_dir":
                d[f.name] = dataclasses.asdict(getattr(self, f.name))
        d["bench"]["target_range"] = list(self.bench.target_range)
        return d

    def model(self) -> HysteresisModel:
        if self.tuning.model:
            return load_model(self.base_dir / self.tuning.model)
        return self.magnet.build()

    def bench_config(self, **overrides: Any) -> BenchConfig:
        b = dataclasses.replace(self.bench, **overrides)
        return BenchConfig(
            n_sequences=b.n_sequences,
            seq_length=b.seq_length,
            target_range=b.target_range,
            mismatch_sigma=b.mismatch_sigma,
            rng_seed=b.rng_seed,
            planner_grid=b.planner_grid,
            tol_b=self.tuning.tol_b,
            smst_samples=self.tuning.smst_samples,
            material=self.magnet,
            waveform=self.coil.waveform(),
            coil=self.coil.coil(),
        )


_SECTION_TYPES = {
    "magnet": MaterialParams,
    "coil": CoilSection,
    "geometry": GeometrySection,
    "tuning": TuningSection,
    "bench": BenchSection,
}


def _coerce(section: str, key: str, default: Any, v: Any) -> Any:
    def number(x: Any) -> bool:
        return isinstance(x, (int, float)) and not isinstance(x, bool)

    if isinstance(default, tuple):
        if isinstance(v, list) and len(v) == len(default) and all(number(x) for x in v):
            return tuple(float(x) for x in v)
    elif isinstance(default, float):
        if number(v):
            return float(v)
    elif isinstance(default, int):
        if isinstance(v, int) and not isinstance(v, bool):
            return v
    elif isinstance(v, type(default)):
        return v
    raise ValidationError(f"[{section}] {key}: expected {type(default).__name__}, got {v!r}")


def _section(name: str, raw: Any) -> Any:
    cls = _SECTION_TYPES[name]
    if not isinstance(raw, dict):
        raise ValidationError(f"[{name}] must be a table")
    known = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(raw) - set(known))
    if unknown:
        raise ValidationError(f"unknown key(s) in [{name}]: {', '.join(unknown)}")
    values = {k: _coerce(name, k, known[k].default, v) for k, v in raw.items()}
    try:
        return cls(**values)
    except ValidationError as ex:
        raise ValidationError(f"[{name}]: {ex}") from ex


def config_from_dict(doc: dict[str, Any], base_dir: Path = Path(".")) -> RunConfig:
    if "format_version" not in doc:
        raise ValidationError("config is missing format_version")
    if doc["format_version"] != FORMAT_VERSION:
        raise ValidationError(f"unsupported config format_version {doc['format_version']!r}")
    unknown = sorted(set(doc) - set(_SECTION_TYPES) - {"format_version"})
    if unknown:
        raise ValidationError(f"unknown config section(s): {', '.join(unknown)}")
    sections = {name: _section(name, doc[name]) for name in _SECTION_TYPES if name in doc}
    return RunConfig(**sections, base_dir=base_dir)


def load_config(path: Path | None) -> RunConfig:
    """``None`` gives the built-in defaults."""
    if path is None:
        return RunConfig()
    with path.open("rb") as f:
        try:
            doc = tomllib.load(f)
        except tomllib.TOMLDecodeError as ex:
            raise ValidationError(f"{path}: {ex}") from ex
    return config_from_dict(doc, base_dir=path.parent)


def default_toml() -> str:
    """The defaults as a TOML document (used by ``tunable-magnet config``)."""
    lines = [f"format_version = {FORMAT_VERSION}"]
    for name, section in RunConfig().to_dict().items():
        if name == "format_version":
            continue
        lines.append(f"\n[{name}]")
        for k, v in section.items():
            if isinstance(v, str):
                lines.append(f'{k} = "{v}"')
            elif isinstance(v, list):
                lines.append(f"{k} = [{', '.join(repr(x) for x in v)}]")
            else:
                lines.append(f"{k} = {v!r}")
    return "\n".join(lines) + "\n"
