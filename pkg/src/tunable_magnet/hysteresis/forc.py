"""
First-order reversal curves: sampling them from a model, reading/writing them as CSV, and identifying an
Everett table from them.

Each curve starts on the descending major branch (after positive saturation) at its reversal field h_r and is
swept back upward; on it, b(h_r, h) - b(h_r, h_r) = E(h, h_r).
"""

from __future__ import annotations
import csv
import dataclasses
import io
from logging import getLogger
from pathlib import Path
from typing import Iterable, Sequence
import numpy as np
import numpy.typing as npt
from scipy.interpolate import LinearNDInterpolator
from scipy.spatial import QhullError

from ..errors import IdentificationError, ValidationError
from .everett import EverettTable, HysteresisModel
from .memory import MemoryStack, advance, evaluate

MIN_GRID = 11
RECOMMENDED_CURVES = 20

_logger = getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class ForcTable:
    """
    Rows of (h_reversal, h, b), in A/m, A/m, T. Within a curve h must be strictly increasing.
    Measured b is allowed to be noisy, so monotonicity of b within a curve is not enforced.
    """

    h_reversal: npt.NDArray[np.float64]
    h: npt.NDArray[np.float64]
    b: npt.NDArray[np.float64]

    def __post_init__(self) -> None:
        hr = np.asarray(self.h_reversal, dtype=np.float64).ravel()
        h = np.asarray(self.h, dtype=np.float64).ravel()
        b = np.asarray(self.b, dtype=np.float64).ravel()
        if not (hr.size == h.size == b.size):
            raise ValidationError(f"column lengths differ: {hr.size}, {h.size}, {b.size}")
        if hr.size == 0:
            raise ValidationError("FORC table is empty")
        if not (np.all(np.isfinite(hr)) and np.all(np.isfinite(h)) and np.all(np.isfinite(b))):
            raise ValidationError("FORC table contains non-finite values")
        for r in np.unique(hr):
            hc = h[hr == r]
            if np.any(np.diff(hc) <= 0):
                raise ValidationError(f"curve h_reversal={r}: h must be strictly increasing")
            if hc[0] < r:
                raise ValidationError(f"curve h_reversal={r}: samples start below the reversal field ({hc[0]})")
        for name, arr in (("h_reversal", hr), ("h", h), ("b", b)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def reversal_fields(self) -> npt.NDArray[np.float64]:
        return np.unique(self.h_reversal)

    def curves(self) -> Iterable[tuple[float, npt.NDArray[np.float64], npt.NDArray[np.float64]]]:
        for r in self.reversal_fields:
            m = self.h_reversal == r
            yield float(r), self.h[m], self.b[m]

    def with_noise(self, sigma_b: float, rng: np.random.Generator) -> ForcTable:
        return ForcTable(self.h_reversal, self.h, self.b + sigma_b * rng.standard_normal(self.b.shape))


def sample_forc(model: HysteresisModel, reversal_fields: Sequence[float], h_points: Sequence[float]) -> ForcTable:
    """
    Synthesizes FORCs from a model: for each reversal field, saturate positively, descend to h_r, then sample
    b at h_r and at every point of ``h_points`` above it.
    """
    h_sat = model.h_sat
    grid = np.unique(np.asarray(h_points, dtype=np.float64))
    rows: list[tuple[float, float, float]] = []
    for r in sorted(float(x) for x in reversal_fields):
        stack = advance(MemoryStack((), +1), h_sat, r, h_sat)
        for h in (r, *grid[grid > r]):
            rows.append((r, float(h), evaluate(model, advance(stack, r, float(h), h_sat), float(h))))
    arr = np.array(rows, dtype=np.float64)
    return ForcTable(arr[:, 0], arr[:, 1], arr[:, 2])


@dataclasses.dataclass(frozen=True, eq=False)
class Identification:
    model: HysteresisModel
    clip_fraction: float
    """Fraction of grid cells whose Preisach weight came out negative and was clipped to zero."""


def cell_weights(values: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    """
    Preisach weight of every grid cell: w[k, l] for the cell alpha in [x_k, x_k+1], beta in [x_l, x_l+1], l <= k.
    Off-diagonal cells are mixed second differences of E; diagonal half-cells are E(x_k+1, x_k) itself.
    """
    e = np.tril(values, k=-1)
    w = e[1:, :-1] - e[:-1, :-1] - e[1:, 1:] + e[:-1, 1:]
    n = values.shape[0] - 1
    idx = np.arange(n)
    w[idx, idx] = e[idx + 1, idx]
    return np.tril(w)


def everett_from_weights(w: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    """Inverse of :func:`cell_weights`: E(x_i, x_j) = sum of w[k, l] over j <= l <= k < i."""
    n = w.shape[0] + 1
    # s[k, j] = sum_{l=j..k} w[k, l]
    s = np.cumsum(w[:, ::-1], axis=1)[:, ::-1]
    s = np.tril(s)
    e = np.zeros((n, n))
    # E[i, j] = sum_{k=j..i-1} s[k, j]
    e[1:, :-1] = np.cumsum(s, axis=0)
    return np.tril(e, k=-1)


def identify_from_forc(table: ForcTable, grid_n: int) -> Identification:
    """
    Builds an Everett table on a ``grid_n``-point grid over [-h_sat, h_sat], with h_sat taken as the top of the
    measured field range. E(alpha, beta) comes from the FORC with reversal beta, relative to its starting point,
    interpolated linearly between samples and curves. Negative cell weights are clipped to zero, which makes E
    non-negative and monotone by construction.
    """
    if grid_n < MIN_GRID:
        raise ValidationError(f"grid_n must be >= {MIN_GRID}, got {grid_n}")
    reversals = table.reversal_fields
    if reversals.size < 2:
        raise IdentificationError(
            f"a single reversal curve (h_reversal={reversals[0]:g}) cannot cover the grid; the whole reversal "
            f"range is a gap"
        )
    if reversals.size < RECOMMENDED_CURVES:
        _logger.warning("Only %d reversal curves; at least %d are recommended", reversals.size, RECOMMENDED_CURVES)

    h_sat = float(np.max(table.h))
    if not h_sat > 0:
        raise IdentificationError(f"curves never reach a positive field (max h = {h_sat})")
    alpha, beta, e = [], [], []
    for r, h, b in table.curves():
        b0 = float(np.interp(r, h, b))
        alpha.extend(h)
        beta.extend(np.full(h.shape, r))
        e.extend(b - b0)
        if h[0] > r:
            # Diagonal is zero by definition; add it so the interpolant reaches alpha = beta.
            alpha.append(r)
            beta.append(r)
            e.append(0.0)
    pts = np.column_stack([alpha, beta])
    try:
        interp = LinearNDInterpolator(pts, np.asarray(e))
    except (QhullError, ValueError) as ex:
        raise IdentificationError(f"FORC samples do not span a 2-D region: {ex}") from ex

    x = np.linspace(-h_sat, h_sat, grid_n)
    a, bb = np.meshgrid(x, x, indexing="ij")
    upper = a > bb
    vals = np.where(upper, interp(a, bb), 0.0)
    missing = upper & ~np.isfinite(vals)
    if np.any(missing):
        ma, mb = a[missing], bb[missing]
        raise IdentificationError(
            f"FORC data do not cover {int(missing.sum())} of {int(upper.sum())} grid nodes: "
            f"gap at reversal fields [{mb.min():g}, {mb.max():g}] A/m, fields [{ma.min():g}, {ma.max():g}] A/m "
            f"(measured reversals span [{reversals.min():g}, {reversals.max():g}] A/m)"
        )
    w = cell_weights(vals)
    n_cells = w.shape[0] * (w.shape[0] + 1) // 2
    negative = int(np.count_nonzero(np.tril(w) < 0))
    e_table = everett_from_weights(np.clip(w, 0.0, None))
    model = HysteresisModel(surface=EverettTable(h_sat=h_sat, values=e_table), chi_rev=0.0)
    return Identification(model=model, clip_fraction=negative / n_cells)


FORC_HEADER = ("h_reversal", "h", "b")


def write_forc_csv(table: ForcTable, out: io.TextIOBase | Path, *, preamble: str | None = None) -> None:
    def emit(f: io.TextIOBase) -> None:
        if preamble:
            f.write(preamble.rstrip("\n") + "\n")
        w = csv.writer(f, lineterminator="\n")
        w.writerow(FORC_HEADER)
        for r, h, b in zip(table.h_reversal, table.h, table.b):
            w.writerow((repr(float(r)), repr(float(h)), repr(float(b))))

    if isinstance(out, Path):
        with out.open("w", newline="") as f:
            emit(f)
    else:
        emit(out)


def read_forc_csv(path: Path) -> ForcTable:
    """Reads ``h_reversal,h,b`` rows; lines starting with '#' are comments."""
    rows: list[tuple[float, float, float]] = []
    header_seen = False
    with path.open(newline="") as f:
        for lineno, line in enumerate(f, start=1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            cells = [c.strip() for c in s.split(",")]
            if not header_seen:
                if tuple(cells) != FORC_HEADER:
                    raise ValidationError(f"{path}:{lineno}: expected header {','.join(FORC_HEADER)!r}, got {s!r}")
                header_seen = True
                continue
            if len(cells) != 3:
                raise ValidationError(f"{path}:{lineno}: expected 3 columns, got {len(cells)}")
            try:
                rows.append((float(cells[0]), float(cells[1]), float(cells[2])))
            except ValueError as ex:
                raise ValidationError(f"{path}:{lineno}: {ex}") from ex
    if not rows:
        raise ValidationError(f"{path}: no FORC rows")
    arr = np.array(rows)
    return ForcTable(arr[:, 0], arr[:, 1], arr[:, 2])
