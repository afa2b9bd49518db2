"""Finite differences on a masked lattice over the unit ball.

Scalar fields live on a regular n^3 lattice covering [-1,1]^3; nodes are
tagged interior / boundary / exterior, and fields are pinned to zero off
the interior (homogeneous Dirichlet data is exact on pinned nodes).
Central stencils give second-order first and second derivatives at
interior nodes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .spectral import SymMat3

INTERIOR = 1
BOUNDARY = 2
EXTERIOR = 3

_OFFSETS_26 = [
    (di, dj, dk)
    for di in (-1, 0, 1)
    for dj in (-1, 0, 1)
    for dk in (-1, 0, 1)
    if (di, dj, dk) != (0, 0, 0)
]


class GridConfigError(ValueError):
    pass


def lattice_shift(a: np.ndarray, di: int, dj: int, dk: int) -> np.ndarray:
    """a evaluated at (i+di, j+dj, k+dk); wrapped values only ever land on
    lattice-edge nodes, which are never interior."""
    return np.roll(a, shift=(-di, -dj, -dk), axis=(0, 1, 2))


@dataclass
class BallGrid:
    """Masked lattice over the closed unit ball.

    Axis order is (i, j, k) -> (x1, x2, x3); node coordinates are
    -1 + index*h with h = 2/(n-1).
    """

    n: int
    bandwidth: float
    h: float
    coords: np.ndarray           # (n,) lattice coordinates per axis
    mask: np.ndarray             # (n,n,n) uint8 of INTERIOR/BOUNDARY/EXTERIOR
    interior: np.ndarray         # (n,n,n) bool
    interior_count: int
    _xgrids: tuple[np.ndarray, np.ndarray, np.ndarray] = field(repr=False, default=None)

    @property
    def xgrids(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Full (n,n,n) coordinate arrays (x1, x2, x3)."""
        if self._xgrids is None:
            self._xgrids = tuple(
                np.meshgrid(self.coords, self.coords, self.coords, indexing="ij")
            )
        return self._xgrids

    @property
    def interior_radius(self) -> float:
        return 1.0 - self.h * self.bandwidth


def make_grid(n: int, bandwidth: float = 1.5) -> BallGrid:
    """Build the masked ball lattice.

    Interior nodes satisfy |x| < 1 - h*bandwidth; nodes whose
    26-neighborhood pokes outside the closed ball are demoted to the
    boundary band so stencils never read beyond |x| <= 1.
    """
    if n != int(n) or n < 9:
        raise GridConfigError(f"n must be an integer >= 9, got {n}")
    n = int(n)
    if n % 2 == 0:
        raise GridConfigError(f"n must be odd, got {n}")
    if bandwidth < 1.0:
        raise GridConfigError(f"bandwidth must be >= 1, got {bandwidth}")
    h = 2.0 / (n - 1)
    coords = -1.0 + h * np.arange(n)
    x1, x2, x3 = np.meshgrid(coords, coords, coords, indexing="ij")
    r = np.sqrt(x1 * x1 + x2 * x2 + x3 * x3)
    in_ball = r <= 1.0
    core = r < 1.0 - h * bandwidth
    neighborhood_ok = np.ones_like(core)
    for di, dj, dk in _OFFSETS_26:
        neighborhood_ok &= lattice_shift(in_ball, di, dj, dk)
    interior = core & neighborhood_ok
    mask = np.full((n, n, n), EXTERIOR, dtype=np.uint8)
    mask[in_ball] = BOUNDARY
    mask[interior] = INTERIOR
    count = int(interior.sum())
    if count == 0:
        raise GridConfigError(f"no interior nodes for n={n}, bandwidth={bandwidth}")
    return BallGrid(n, float(bandwidth), h, coords, mask, interior, count)


@dataclass
class GridField:
    """Scalar field on a BallGrid.

    Dirichlet fields (the solver's unknowns and residuals) are pinned to
    zero on boundary and exterior nodes.  Sampled fields built with
    pin=False keep their values on the boundary band so stencils stay
    exact for polynomials there; exterior nodes are zero either way and
    are never read by interior stencils.
    """

    grid: BallGrid
    data: np.ndarray

    @classmethod
    def zeros(cls, grid: BallGrid) -> "GridField":
        return cls(grid, np.zeros((grid.n,) * 3))

    @classmethod
    def from_array(cls, grid: BallGrid, arr: np.ndarray, pin: bool = True) -> "GridField":
        arr = np.asarray(arr, dtype=float)
        if arr.shape != (grid.n,) * 3:
            raise ValueError(f"array shape {arr.shape} does not match grid n={grid.n}")
        keep = grid.interior if pin else (grid.mask != EXTERIOR)
        return cls(grid, np.where(keep, arr, 0.0))

    @classmethod
    def from_function(cls, grid: BallGrid, fn: Callable, pin: bool = True) -> "GridField":
        x1, x2, x3 = grid.xgrids
        return cls.from_array(grid, fn(x1, x2, x3), pin=pin)

    def sup(self) -> float:
        return float(np.abs(self.data[self.grid.interior]).max(initial=0.0))

    def interior_values(self) -> np.ndarray:
        return self.data[self.grid.interior]

    def __add__(self, other: "GridField") -> "GridField":
        return GridField(self.grid, self.data + other.data)

    def __sub__(self, other: "GridField") -> "GridField":
        return GridField(self.grid, self.data - other.data)

    def __mul__(self, c: float) -> "GridField":
        return GridField(self.grid, self.data * c)

    __rmul__ = __mul__

    def __neg__(self) -> "GridField":
        return GridField(self.grid, -self.data)


def d1(f: GridField, axis: int) -> GridField:
    """Central first difference along axis in {1,2,3}; zero off interior."""
    if axis not in (1, 2, 3):
        raise ValueError(f"axis must be in 1..3, got {axis}")
    g = f.grid
    e = [0, 0, 0]
    e[axis - 1] = 1
    out = (lattice_shift(f.data, *e) - lattice_shift(f.data, *[-v for v in e])) / (2.0 * g.h)
    return GridField(g, np.where(g.interior, out, 0.0))


def d2(f: GridField, axes: tuple[int, int]) -> GridField:
    """Central second difference for an axis pair; zero off interior."""
    i, j = axes
    if i not in (1, 2, 3) or j not in (1, 2, 3):
        raise ValueError(f"axes must be in 1..3, got {axes}")
    g = f.grid
    if i == j:
        e = [0, 0, 0]
        e[i - 1] = 1
        out = (
            lattice_shift(f.data, *e) - 2.0 * f.data + lattice_shift(f.data, *[-v for v in e])
        ) / (g.h * g.h)
    else:
        ei = [0, 0, 0]
        ej = [0, 0, 0]
        ei[i - 1] = 1
        ej[j - 1] = 1
        pp = [a + b for a, b in zip(ei, ej)]
        pm = [a - b for a, b in zip(ei, ej)]
        out = (
            lattice_shift(f.data, *pp)
            - lattice_shift(f.data, *pm)
            - lattice_shift(f.data, *[-v for v in pm])
            + lattice_shift(f.data, *[-v for v in pp])
        ) / (4.0 * g.h * g.h)
    return GridField(g, np.where(g.interior, out, 0.0))


_AXIS_PAIRS = ((1, 1), (2, 2), (3, 3), (1, 2), (1, 3), (2, 3))


def hessian_fields(f: GridField) -> dict[tuple[int, int], GridField]:
    """All six second-difference fields keyed by axis pair."""
    return {pair: d2(f, pair) for pair in _AXIS_PAIRS}


def gradient_fields(f: GridField) -> tuple[GridField, GridField, GridField]:
    return d1(f, 1), d1(f, 2), d1(f, 3)


def norms(f: GridField, order: int) -> float:
    """Sup over interior nodes of the field and its FD derivatives up to
    the given order (0, 1 or 2)."""
    if order not in (0, 1, 2):
        raise ValueError(f"order must be 0, 1 or 2, got {order}")
    value = f.sup()
    if order >= 1:
        for axis in (1, 2, 3):
            value = max(value, d1(f, axis).sup())
    if order >= 2:
        for pair in _AXIS_PAIRS:
            value = max(value, d2(f, pair).sup())
    return value


def hessian_at(f: GridField, node: tuple[int, int, int]) -> SymMat3:
    """Second-difference Hessian at one interior node."""
    g = f.grid
    i, j, k = node
    if not g.interior[i, j, k]:
        raise ValueError(f"node {node} is not interior")
    a = f.data
    h2 = g.h * g.h
    m11 = (a[i + 1, j, k] - 2 * a[i, j, k] + a[i - 1, j, k]) / h2
    m22 = (a[i, j + 1, k] - 2 * a[i, j, k] + a[i, j - 1, k]) / h2
    m33 = (a[i, j, k + 1] - 2 * a[i, j, k] + a[i, j, k - 1]) / h2
    m12 = (
        a[i + 1, j + 1, k] - a[i + 1, j - 1, k] - a[i - 1, j + 1, k] + a[i - 1, j - 1, k]
    ) / (4 * h2)
    m13 = (
        a[i + 1, j, k + 1] - a[i + 1, j, k - 1] - a[i - 1, j, k + 1] + a[i - 1, j, k - 1]
    ) / (4 * h2)
    m23 = (
        a[i, j + 1, k + 1] - a[i, j + 1, k - 1] - a[i, j - 1, k + 1] + a[i, j - 1, k - 1]
    ) / (4 * h2)
    return SymMat3(m11, m22, m33, m12, m13, m23)


# ---------------------------------------------------------------------------
# Field dump format: CSV columns i,j,k,x1,x2,x3,value; interior only,
# row-major order.

FIELD_CSV_HEADER = ("i", "j", "k", "x1", "x2", "x3", "value")


def field_rows(f: GridField) -> list[tuple[int, int, int, float, float, float, float]]:
    g = f.grid
    rows = []
    for i, j, k in np.argwhere(g.interior):
        rows.append(
            (
                int(i),
                int(j),
                int(k),
                float(g.coords[i]),
                float(g.coords[j]),
                float(g.coords[k]),
                float(f.data[i, j, k]),
            )
        )
    return rows


def write_field_csv(f: GridField, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(FIELD_CSV_HEADER)
        for row in field_rows(f):
            writer.writerow(row[:3] + tuple(f"{v:.17g}" for v in row[3:]))


def field_from_rows(grid: BallGrid, rows: Iterable) -> GridField:
    data = np.zeros((grid.n,) * 3)
    for row in rows:
        i, j, k = int(row[0]), int(row[1]), int(row[2])
        data[i, j, k] = float(row[-1])
    return GridField.from_array(grid, data)


def read_field_csv(grid: BallGrid, path) -> GridField:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != FIELD_CSV_HEADER:
            raise ValueError(f"unexpected field CSV header: {header}")
        return field_from_rows(grid, reader)


def sample_trilinear(f: GridField, pts: np.ndarray) -> np.ndarray:
    """Trilinear interpolation of a field at points inside the lattice.

    pts has shape (N, 3) in lattice coordinates (the [-1,1]^3 cube).
    """
    g = f.grid
    pts = np.asarray(pts, dtype=float)
    t = (pts + 1.0) / g.h
    i0 = np.clip(np.floor(t).astype(int), 0, g.n - 2)
    frac = t - i0
    out = np.zeros(len(pts))
    for di in (0, 1):
        wi = frac[:, 0] if di else 1.0 - frac[:, 0]
        for dj in (0, 1):
            wj = frac[:, 1] if dj else 1.0 - frac[:, 1]
            for dk in (0, 1):
                wk = frac[:, 2] if dk else 1.0 - frac[:, 2]
                out += wi * wj * wk * f.data[i0[:, 0] + di, i0[:, 1] + dj, i0[:, 2] + dk]
    return out
