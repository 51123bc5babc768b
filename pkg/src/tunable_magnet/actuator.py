"""
Lumped magnetic-circuit models of the C-shaped tunable magnet actuator (TMA) and the bias-linearized hybrid
actuator (HTMA), with Maxwell-stress gap forces and a piecewise-linear force model fit.

Conventions, fixed here for the whole package:

- Every permanent magnet sits on a linear recoil line b_m = b_r + mu0 * mu_rec * h_m and is modeled as an MMF
  source b_r * l / (mu0 * mu_rec) in series with its internal reluctance l / (mu0 * mu_rec * a).
- No leakage. Fringing is an optional factor on the effective gap area (1.0 = none).
- The mover coordinate x is positive toward gap 1 (TMA: toward closing its gaps). Gap 1 is g0 - x long,
  HTMA gap 2 is g0 + x long. Positive force points toward positive x.
- HTMA gap fluxes are signed along each gap's bias direction, so phi_g1 = bias + control, phi_g2 = bias - control.

HTMA network (the mover is the reference node M; A and B are the stator poles next to gaps 1 and 2):

    gap 1      A -> M        gap 2      B -> M
    bias 1     M -> A        bias 2     M -> B        (hard magnets, MMF pushing toward the poles)
    tunable    B -> A                                  (soft magnet; control flux circulates A -> M -> B -> A)
"""

from __future__ import annotations
import dataclasses
from typing import Iterable, Sequence
import numpy as np
import numpy.typing as npt
from scipy.constants import mu_0

from .errors import FitError, GeometryError, ValidationError


@dataclasses.dataclass(frozen=True)
class TmaGeometry:
    a_gap: float = 1e-4
    """Pole-face area, m^2"""
    g0: float = 0.5e-3
    """Nominal gap length, m"""
    l_m: float = 10e-3
    """Soft-magnet length along magnetization, m"""
    a_m: float = 1e-4
    """Soft-magnet cross-section, m^2"""
    mu_rec: float = 1.05
    n_gaps: int = 2
    fringing: float = 1.0
    """Multiplier on the effective gap area."""

    def __post_init__(self) -> None:
        for name in ("a_gap", "g0", "l_m", "a_m", "fringing"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise GeometryError(f"{name} must be positive, got {v}")
        if not 1 <= self.mu_rec <= 20:
            raise GeometryError(f"mu_rec must lie in [1, 20], got {self.mu_rec}")
        if not (isinstance(self.n_gaps, int) and self.n_gaps >= 1):
            raise GeometryError(f"n_gaps must be a positive integer, got {self.n_gaps}")

    @property
    def a_eff(self) -> float:
        return self.a_gap * self.fringing

    def magnet_source(self, b_r: float) -> tuple[float, float]:
        """(MMF [A], internal reluctance [1/H]) of the tunable magnet."""
        return b_r * self.l_m / (mu_0 * self.mu_rec), self.l_m / (mu_0 * self.mu_rec * self.a_m)


@dataclasses.dataclass(frozen=True)
class HtmaGeometry(TmaGeometry):
    b_r_bias: float = 1.2
    """Hard-magnet remanence, T"""
    l_bias: float = 120e-3
    a_bias: float = 5e-5
    mu_rec_bias: float = 1.05
    x_range: float = 250e-6
    """Half travel: admissible positions are |x| <= x_range."""

    def __post_init__(self) -> None:
        super().__post_init__()
        for name in ("l_bias", "a_bias", "x_range"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise GeometryError(f"{name} must be positive, got {v}")
        if not 1 <= self.mu_rec_bias <= 20:
            raise GeometryError(f"mu_rec_bias must lie in [1, 20], got {self.mu_rec_bias}")
        if not self.x_range < self.g0:
            raise GeometryError(f"x_range ({self.x_range}) must be below g0 ({self.g0})")

    def bias_source(self) -> tuple[float, float]:
        return (
            self.b_r_bias * self.l_bias / (mu_0 * self.mu_rec_bias),
            self.l_bias / (mu_0 * self.mu_rec_bias * self.a_bias),
        )


@dataclasses.dataclass(frozen=True)
class FluxSolution:
    phi_tm: float
    """Flux through the tunable magnet, Wb"""
    phi_g1: float
    phi_g2: float
    """Zero for the TMA, where all gaps carry phi_g1."""
    h_m: float
    b_m: float
    coenergy: float
    """Magnetic co-energy of the linear network, J"""
    kirchhoff_residual: float
    """Largest nodal flux imbalance relative to the largest branch flux."""

    @property
    def operating_point(self) -> tuple[float, float]:
        return self.h_m, self.b_m


@dataclasses.dataclass(frozen=True)
class _Branch:
    src: int
    dst: int
    mmf: float
    reluctance: float


def _solve_network(n_nodes: int, branches: Sequence[_Branch]) -> tuple[npt.NDArray[np.float64], float]:
    """
    Nodal analysis with node 0 as reference. Branch flux src -> dst is (mmf + u_src - u_dst) / reluctance.
    Returns branch fluxes and the relative Kirchhoff residual.
    """
    g = np.zeros((n_nodes, n_nodes))
    rhs = np.zeros(n_nodes)
    for b in branches:
        p = 1.0 / b.reluctance
        for i, j in ((b.src, b.src), (b.dst, b.dst)):
            g[i, j] += p
        g[b.src, b.dst] -= p
        g[b.dst, b.src] -= p
        rhs[b.src] -= b.mmf * p
        rhs[b.dst] += b.mmf * p
    u = np.zeros(n_nodes)
    u[1:] = np.linalg.solve(g[1:, 1:], rhs[1:])
    phi = np.array([(b.mmf + u[b.src] - u[b.dst]) / b.reluctance for b in branches])
    net = np.zeros(n_nodes)
    for b, f in zip(branches, phi):
        net[b.src] -= f
        net[b.dst] += f
    scale = max(float(np.max(np.abs(phi))), 1e-300)
    return phi, float(np.max(np.abs(net))) / scale


def _coenergy(branches: Sequence[_Branch], phi: npt.NDArray[np.float64]) -> float:
    return 0.5 * sum(b.mmf * f for b, f in zip(branches, phi))


def solve_circuit_tma(geom: TmaGeometry, b_r: float, x: float) -> FluxSolution:
    """Soft magnet in series with n_gaps gaps of length g0 - x."""
    if not x < geom.g0:
        raise GeometryError(f"gap closed: x = {x} m >= g0 = {geom.g0} m")
    mmf, r_m = geom.magnet_source(b_r)
    r_g = geom.n_gaps * (geom.g0 - x) / (mu_0 * geom.a_eff)
    branches = [_Branch(0, 1, mmf, r_m), _Branch(1, 0, 0.0, r_g)]
    phi, resid = _solve_network(2, branches)
    b_m = phi[0] / geom.a_m
    return FluxSolution(
        phi_tm=float(phi[0]),
        phi_g1=float(phi[1]),
        phi_g2=0.0,
        h_m=float((b_m - b_r) / (mu_0 * geom.mu_rec)),
        b_m=float(b_m),
        coenergy=_coenergy(branches, phi),
        kirchhoff_residual=resid,
    )


def force_tma(sol: FluxSolution, geom: TmaGeometry) -> float:
    """Maxwell stress summed over the gap faces; always attractive (gap closing)."""
    return geom.n_gaps * sol.phi_g1**2 / (2 * mu_0 * geom.a_eff)


def _htma_branches(geom: HtmaGeometry, b_r: float, x: float, bias: bool = True) -> list[_Branch]:
    if not abs(x) < geom.g0:
        raise GeometryError(f"gap closed: |x| = {abs(x)} m >= g0 = {geom.g0} m")
    mmf_t, r_t = geom.magnet_source(b_r)
    mmf_b, r_b = geom.bias_source()
    if not bias:
        mmf_b = 0.0
    return [
        _Branch(1, 0, 0.0, (geom.g0 - x) / (mu_0 * geom.a_eff)),  # gap 1: A -> M
        _Branch(2, 0, 0.0, (geom.g0 + x) / (mu_0 * geom.a_eff)),  # gap 2: B -> M
        _Branch(0, 1, mmf_b, r_b),  # bias 1: M -> A
        _Branch(0, 2, mmf_b, r_b),  # bias 2: M -> B
        _Branch(2, 1, mmf_t, r_t),  # tunable: B -> A
    ]


def solve_circuit_htma(geom: HtmaGeometry, b_r: float, x: float, *, bias: bool = True) -> FluxSolution:
    """
    Three-source linear network. With ``bias=False`` the hard magnets are nulled, which gives the pure control
    part of the superposition.
    """
    branches = _htma_branches(geom, b_r, x, bias)
    phi, resid = _solve_network(3, branches)
    b_m = phi[4] / geom.a_m
    return FluxSolution(
        phi_tm=float(phi[4]),
        phi_g1=float(phi[0]),
        phi_g2=float(phi[1]),
        h_m=float((b_m - b_r) / (mu_0 * geom.mu_rec)),
        b_m=float(b_m),
        coenergy=_coenergy(branches, phi),
        kirchhoff_residual=resid,
    )


def force_htma(sol: FluxSolution, geom: HtmaGeometry) -> float:
    """(phi_g1^2 - phi_g2^2) / (2 mu0 A), positive toward gap 1."""
    return (sol.phi_g1**2 - sol.phi_g2**2) / (2 * mu_0 * geom.a_eff)


# ---------------------------------------------------------------------------------------------------------------------
# Force maps and the piecewise-linear model F = k_m * phi_tm + k_a * x


def force_map(
    geom: TmaGeometry, positions: Iterable[float], b_r_values: Iterable[float]
) -> list[tuple[float, float, float]]:
    """(x, phi_tm, F) over a grid; the geometry type selects the actuator."""
    rows = []
    b_r_values = list(b_r_values)
    for x in positions:
        for b_r in b_r_values:
            if isinstance(geom, HtmaGeometry):
                sol = solve_circuit_htma(geom, b_r, x)
                f = force_htma(sol, geom)
            else:
                sol = solve_circuit_tma(geom, b_r, x)
                f = force_tma(sol, geom)
            rows.append((float(x), sol.phi_tm, f))
    return rows


@dataclasses.dataclass(frozen=True)
class Segment:
    x_lo: float
    x_hi: float
    k_m: float
    """N/Wb"""
    k_a: float
    """N/m"""
    r2: float
    max_residual: float
    """N"""


@dataclasses.dataclass(frozen=True)
class ForceFit:
    k_m: float
    k_a: float
    r2: float
    segments: tuple[Segment, ...]

    def to_dict(self) -> dict[str, object]:
        return {
            "k_m": self.k_m,
            "k_a": self.k_a,
            "r2": self.r2,
            "segments": [dataclasses.asdict(s) for s in self.segments],
        }

    def predict(self, x: float, phi_tm: float) -> float:
        for s in self.segments:
            if s.x_lo <= x <= s.x_hi:
                return s.k_m * phi_tm + s.k_a * x
        raise ValidationError(f"x = {x} is outside the fitted range")


def _lstsq(x: npt.NDArray[np.float64], phi: npt.NDArray[np.float64], f: npt.NDArray[np.float64], where: str) -> tuple[float, float, float, float]:
    a = np.column_stack([phi, x])
    if a.shape[0] < 2 or np.linalg.matrix_rank(a, tol=1e-12 * max(float(np.abs(a).max()), 1e-300) * max(a.shape)) < 2:
        if not np.any(phi):
            raise FitError(f"{where}: all samples have phi_tm = 0, so the motor constant is indeterminate")
        if not np.any(x):
            raise FitError(f"{where}: all samples have x = 0, so the stiffness is indeterminate")
        raise FitError(f"{where}: sample grid is rank-deficient (phi_tm and x are collinear)")
    # Column scaling keeps the normal equations well conditioned (phi ~ 1e-4 Wb, x ~ 1e-4 m).
    scale = np.abs(a).max(axis=0)
    coef, *_ = np.linalg.lstsq(a / scale, f, rcond=None)
    coef = coef / scale
    resid = f - a @ coef
    ss_tot = float(np.sum((f - f.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(coef[0]), float(coef[1]), min(max(r2, 0.0), 1.0), float(np.max(np.abs(resid)))


def fit_piecewise_linear(samples: Sequence[tuple[float, float, float]], n_segments: int = 1) -> ForceFit:
    """
    Splits the sampled x range into ``n_segments`` equal intervals and fits F = k_m * phi_tm + k_a * x in each by
    least squares (no intercept). r^2 is clipped to [0, 1]. The top-level constants come from one fit over all
    samples.
    """
    if n_segments < 1:
        raise ValidationError(f"n_segments must be >= 1, got {n_segments}")
    arr = np.asarray(samples, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 3 or arr.shape[0] == 0:
        raise FitError("samples must be a non-empty list of (x, phi_tm, force) triples")
    x, phi, f = arr.T
    k_m, k_a, r2, _ = _lstsq(x, phi, f, "global fit")
    edges = np.linspace(x.min(), x.max(), n_segments + 1)
    idx = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, n_segments - 1)
    segments = []
    for s in range(n_segments):
        m = idx == s
        km, ka, r2s, mr = _lstsq(x[m], phi[m], f[m], f"segment {s} [{edges[s]:g}, {edges[s + 1]:g}] m")
        segments.append(Segment(float(edges[s]), float(edges[s + 1]), km, ka, r2s, mr))
    return ForceFit(k_m=k_m, k_a=k_a, r2=r2, segments=tuple(segments))
