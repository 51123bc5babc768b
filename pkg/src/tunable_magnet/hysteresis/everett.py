"""
Everett surfaces and the scalar Preisach hysteresis model built on top of them.

Sign and scaling conventions used everywhere in this package:

    E(alpha, beta)      flux-density change [tesla] along the ascending branch from a reversal at beta up to alpha;
                        defined for alpha >= beta, zero on the diagonal.
    E(h_sat, -h_sat)    twice the irreversible saturation flux density.
    B                   anchor * E(h_sat, -h_sat) / 2 + telescoping Everett sum + chi_rev * clip(h, -h_sat, h_sat)

The reversible term is clipped at the saturation field so that |B| never exceeds b_sat.
"""

from __future__ import annotations
import dataclasses
import functools
from typing import Union
import numpy as np
import numpy.typing as npt
from scipy.special import ndtr

from ..errors import ValidationError

_QUAD_NODES, _QUAD_WEIGHTS = np.polynomial.legendre.leggauss(48)
_CACHE_LIMIT = 200_000

REVERSIBLE_FRACTION_LIMIT = 0.1
"""The reversible term may contribute at most this fraction of b_sat at h_sat."""


@dataclasses.dataclass(frozen=True, eq=False)
class GaussianPreisach:
    """
    Preisach density that is Gaussian in the interaction field h_u = (alpha + beta) / 2 (zero mean, std sigma_u)
    and Gaussian in the half-width h_k = (alpha - beta) / 2 (mean h_c, std sigma_c), scaled by ``scale``,
    truncated to the saturation triangle -h_sat <= beta <= alpha <= h_sat.

    In (alpha, beta) coordinates the density is scale/2 * N(h_u; 0, sigma_u) * N(h_k; h_c, sigma_c),
    which reduces the Everett double integral to a single integral over h_k.
    """

    h_sat: float
    h_c: float
    sigma_c: float
    sigma_u: float
    scale: float = 1.0
    _cache: dict[tuple[float, float], float] = dataclasses.field(
        default_factory=dict, init=False, repr=False, compare=False
    )

    def __post_init__(self) -> None:
        for name in ("h_sat", "sigma_c", "sigma_u", "scale"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValidationError(f"{name} must be positive and finite, got {v}")
        if not (np.isfinite(self.h_c) and 0 <= self.h_c < self.h_sat):
            raise ValidationError(f"h_c must lie in [0, h_sat), got {self.h_c}")

    def everett(self, alpha: float, beta: float) -> float:
        key = (alpha, beta)
        cache = self._cache
        try:
            return cache[key]
        except KeyError:
            pass
        if len(cache) > _CACHE_LIMIT:
            cache.clear()
        e = float(self.everett_many(np.asarray(alpha, dtype=np.float64), np.asarray(beta, dtype=np.float64)))
        cache[key] = e
        return e

    def everett_many(self, alpha: npt.ArrayLike, beta: npt.ArrayLike) -> npt.NDArray[np.float64]:
        a = np.clip(np.asarray(alpha, dtype=np.float64), -self.h_sat, self.h_sat)
        b = np.clip(np.asarray(beta, dtype=np.float64), -self.h_sat, self.h_sat)
        half = np.maximum(a - b, 0.0)[..., None] / 2
        k = (_QUAD_NODES + 1) * half / 2
        w = _QUAD_WEIGHTS * half / 2
        pdf_k = np.exp(-0.5 * ((k - self.h_c) / self.sigma_c) ** 2) / (self.sigma_c * np.sqrt(2 * np.pi))
        span = ndtr((a[..., None] - k) / self.sigma_u) - ndtr((b[..., None] + k) / self.sigma_u)
        return 2 * self.scale * np.sum(w * pdf_k * span, axis=-1)

    def density(self, alpha: npt.ArrayLike, beta: npt.ArrayLike) -> npt.NDArray[np.float64]:
        """Preisach density in (alpha, beta) coordinates; zero outside the saturation triangle."""
        a = np.asarray(alpha, dtype=np.float64)
        b = np.asarray(beta, dtype=np.float64)
        u = (a + b) / 2
        k = (a - b) / 2
        pu = np.exp(-0.5 * (u / self.sigma_u) ** 2) / (self.sigma_u * np.sqrt(2 * np.pi))
        pk = np.exp(-0.5 * ((k - self.h_c) / self.sigma_c) ** 2) / (self.sigma_c * np.sqrt(2 * np.pi))
        inside = (a >= b) & (a <= self.h_sat) & (b >= -self.h_sat)
        return np.where(inside, self.scale / 2 * pu * pk, 0.0)


@dataclasses.dataclass(frozen=True, eq=False)
class EverettTable:
    """
    Everett values on a uniform grid over [-h_sat, h_sat]; ``values[i, j]`` holds E(x_i, x_j) for i >= j.
    Entries above the diagonal are ignored and stored as zero.

    Interpolation is bilinear in full grid cells and linear on the half cells that straddle the diagonal,
    which keeps E(a, a) = 0 exactly and preserves monotonicity of the node values.
    """

    h_sat: float
    values: npt.NDArray[np.float64]

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != v.shape[1] or v.shape[0] < 2:
            raise ValidationError(f"Everett table must be a square matrix of size >= 2, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValidationError("Everett table contains non-finite values")
        v = np.tril(v, k=-1)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def grid_n(self) -> int:
        return int(self.values.shape[0])

    @functools.cached_property
    def grid(self) -> npt.NDArray[np.float64]:
        return np.linspace(-self.h_sat, self.h_sat, self.grid_n)

    @functools.cached_property
    def _step(self) -> float:
        return 2 * self.h_sat / (self.grid_n - 1)

    def _locate(self, x: float) -> tuple[int, float]:
        s = (min(max(x, -self.h_sat), self.h_sat) + self.h_sat) / self._step
        i = min(int(s), self.grid_n - 2)
        return i, s - i

    def everett(self, alpha: float, beta: float) -> float:
        if alpha <= beta:
            return 0.0
        i, ta = self._locate(alpha)
        j, tb = self._locate(beta)
        v = self.values
        if i == j:
            return float(v[i + 1, i] * max(ta - tb, 0.0))
        e00 = v[i, j]
        e10 = v[i + 1, j]
        e01 = v[i, j + 1]
        e11 = v[i + 1, j + 1]
        return float((1 - ta) * (1 - tb) * e00 + ta * (1 - tb) * e10 + (1 - ta) * tb * e01 + ta * tb * e11)

    def everett_many(self, alpha: npt.ArrayLike, beta: npt.ArrayLike) -> npt.NDArray[np.float64]:
        a, b = np.broadcast_arrays(np.asarray(alpha, dtype=np.float64), np.asarray(beta, dtype=np.float64))
        out = np.array([self.everett(x, y) for x, y in zip(a.ravel(), b.ravel())], dtype=np.float64)
        return out.reshape(a.shape)

    def perturbed(self, sigma: float, rng: np.random.Generator) -> EverettTable:
        """Per-node multiplicative perturbation E -> E * (1 + eps), eps ~ N(0, sigma^2). The diagonal stays zero."""
        eps = rng.standard_normal(self.values.shape)
        return EverettTable(h_sat=self.h_sat, values=self.values * (1 + sigma * eps))


EverettSurface = Union[GaussianPreisach, EverettTable]


@dataclasses.dataclass(frozen=True)
class MaterialParams:
    """Macroscopic description of the soft magnet; :meth:`build` turns it into the analytic model."""

    b_r_max: float = 1.0
    b_sat: float = 1.2
    h_sat: float = 500e3
    h_c: float = 150e3
    sigma_c: float = 60e3
    sigma_u: float = 80e3

    def __post_init__(self) -> None:
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if not (isinstance(v, (int, float)) and np.isfinite(v) and v > 0):
                raise ValidationError(f"{f.name} must be a positive number, got {v!r}")

    def build(self) -> HysteresisModel:
        return HysteresisModel.analytic(**dataclasses.asdict(self))


@dataclasses.dataclass(frozen=True, eq=False)
class HysteresisModel:
    """
    Immutable; compare by identity. The reversible susceptibility ``chi_rev`` is in tesla per A/m.
    ``h_clip`` is the hard limit on applied fields (default 10 * h_sat).
    """

    surface: EverettSurface
    chi_rev: float = 0.0
    h_clip: float = 0.0

    def __post_init__(self) -> None:
        if not np.isfinite(self.chi_rev) or self.chi_rev < 0:
            raise ValidationError(f"chi_rev must be non-negative, got {self.chi_rev}")
        if self.h_clip == 0.0:
            object.__setattr__(self, "h_clip", 10 * self.h_sat)
        if not self.h_clip >= self.h_sat:
            raise ValidationError(f"h_clip ({self.h_clip}) must be >= h_sat ({self.h_sat})")

    @property
    def h_sat(self) -> float:
        return self.surface.h_sat

    @property
    def is_analytic(self) -> bool:
        return isinstance(self.surface, GaussianPreisach)

    def everett(self, alpha: float, beta: float) -> float:
        return self.surface.everett(alpha, beta)

    @functools.cached_property
    def b_irr_sat(self) -> float:
        return self.surface.everett(self.h_sat, -self.h_sat) / 2

    @functools.cached_property
    def b_sat(self) -> float:
        return self.b_irr_sat + self.chi_rev * self.h_sat

    @functools.cached_property
    def b_r_max(self) -> float:
        """Remanence after positive saturation."""
        return self.b_irr_sat - self.surface.everett(self.h_sat, 0.0)

    @staticmethod
    def analytic(
        *,
        b_r_max: float = 1.0,
        b_sat: float = 1.2,
        h_sat: float = 500e3,
        h_c: float = 150e3,
        sigma_c: float = 60e3,
        sigma_u: float = 80e3,
        h_clip: float | None = None,
    ) -> HysteresisModel:
        """
        Builds the Gaussian Preisach model with its amplitude chosen so that the remanence from positive saturation
        equals ``b_r_max``; the reversible susceptibility then takes up the remaining b_sat - b_irr_sat.
        """
        if not 0 < b_r_max < b_sat:
            raise ValidationError(f"need 0 < b_r_max < b_sat, got b_r_max={b_r_max}, b_sat={b_sat}")
        unit = GaussianPreisach(h_sat=h_sat, h_c=h_c, sigma_c=sigma_c, sigma_u=sigma_u)
        unit_remanence = unit.everett(h_sat, -h_sat) / 2 - unit.everett(h_sat, 0.0)
        if unit_remanence <= 0:
            raise ValidationError("density parameters give no positive remanence")
        surface = dataclasses.replace(unit, scale=b_r_max / unit_remanence)
        b_irr_sat = surface.everett(h_sat, -h_sat) / 2
        reversible = b_sat - b_irr_sat
        if reversible < -1e-12 * b_sat or reversible > REVERSIBLE_FRACTION_LIMIT * b_sat:
            raise ValidationError(
                f"density parameters give squareness {b_r_max / b_irr_sat:.4f}; the reversible part at h_sat would be "
                f"{reversible:+.4f} T, outside [0, {REVERSIBLE_FRACTION_LIMIT} * b_sat]"
            )
        return HysteresisModel(
            surface=surface,
            chi_rev=max(reversible, 0.0) / h_sat,
            h_clip=10 * h_sat if h_clip is None else h_clip,
        )

    def tabulate(self, grid_n: int) -> HysteresisModel:
        """
        Samples this model onto an Everett table. The reversible term is folded into the table as chi_rev * (a - b),
        which reproduces the same B for every history.
        """
        if grid_n < 2:
            raise ValidationError(f"grid_n must be >= 2, got {grid_n}")
        x = np.linspace(-self.h_sat, self.h_sat, grid_n)
        a, b = np.meshgrid(x, x, indexing="ij")
        e = self.surface.everett_many(a, b)
        e = np.where(a > b, e + self.chi_rev * (a - b), 0.0)
        return HysteresisModel(surface=EverettTable(h_sat=self.h_sat, values=e), chi_rev=0.0, h_clip=self.h_clip)

    def with_perturbation(self, sigma: float, rng: np.random.Generator, grid_n: int | None = None) -> HysteresisModel:
        """
        A mismatched copy: the Everett table (tabulated first if this model is analytic) perturbed per node.
        Large sigma may make the perturbed surface non-monotone; such plants are only meant to be executed.
        """
        if sigma < 0:
            raise ValidationError(f"sigma must be non-negative, got {sigma}")
        if isinstance(self.surface, EverettTable):
            base = self
        else:
            base = self.tabulate(grid_n or 201)
        assert isinstance(base.surface, EverettTable)
        if sigma == 0:
            return base
        return HysteresisModel(surface=base.surface.perturbed(sigma, rng), chi_rev=base.chi_rev, h_clip=base.h_clip)

