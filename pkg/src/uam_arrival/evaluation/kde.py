from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DegenerateSampleError(ValueError):
    """Too few points or zero spread along an axis; no bandwidth can be chosen."""


@dataclass(frozen=True)
class GridSpec:
    extent: float = 1200.0
    cells: int = 200

    def axis(self) -> np.ndarray:
        """Cell centres spanning [-extent, extent]."""
        w = 2 * self.extent / self.cells
        return -self.extent + w * (np.arange(self.cells) + 0.5)

    @property
    def cell_area(self) -> float:
        return (2 * self.extent / self.cells) ** 2


@dataclass
class KDEResult:
    n_axis: np.ndarray
    e_axis: np.ndarray
    density: np.ndarray       # (len(n_axis), len(e_axis)), integrates to 1 over the grid
    bandwidth: tuple

    def mass(self) -> float:
        dn = self.n_axis[1] - self.n_axis[0]
        de = self.e_axis[1] - self.e_axis[0]
        return float(self.density.sum() * dn * de)


def silverman_bandwidth(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        raise DegenerateSampleError("at least two points are needed")
    s = float(np.std(x, ddof=1))
    if not s > 0.0:
        raise DegenerateSampleError("zero variance along an axis")
    return 1.06 * s * x.size ** (-0.2)


def spatial_kde(points, grid: GridSpec = GridSpec()) -> KDEResult:
    """Product-Gaussian kernel density of (n, e) points on a regular grid.

    Bandwidths follow Silverman's rule per axis. The result is renormalised
    so that its Riemann sum over the grid is one.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    hn = silverman_bandwidth(pts[:, 0])
    he = silverman_bandwidth(pts[:, 1])
    axis = grid.axis()
    # separable kernel: density = Kn^T Ke, with per-point 1-D Gaussians
    kn = np.exp(-0.5 * ((axis[None, :] - pts[:, :1]) / hn) ** 2)
    ke = np.exp(-0.5 * ((axis[None, :] - pts[:, 1:]) / he) ** 2)
    dens = kn.T @ ke
    total = dens.sum() * grid.cell_area
    if not total > 0.0:
        raise DegenerateSampleError("all points lie far outside the grid")
    return KDEResult(axis.copy(), axis.copy(), dens / total, (hn, he))


def write_kde_csv(path, result: KDEResult) -> None:
    """Matrix CSV: first row holds the east axis, first column the north axis."""
    with open(path, "w") as fh:
        fh.write("n_m\\e_m," + ",".join(repr(float(e)) for e in result.e_axis) + "\n")
        for n, row in zip(result.n_axis, result.density):
            fh.write(repr(float(n)) + "," + ",".join(repr(float(v)) for v in row) + "\n")


def read_kde_csv(path) -> KDEResult:
    with open(path) as fh:
        header = fh.readline().rstrip("\n").split(",")
        e_axis = np.array([float(v) for v in header[1:]])
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return KDEResult(data[:, 0].copy(), e_axis, data[:, 1:].copy(), (float("nan"), float("nan")))
