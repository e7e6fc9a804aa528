"""Observable extraction for a truncated oscillator mode.

Quadrature statistics (means, 2x2 second-moment matrix, extremal standard
deviations and the squeeze axis), squeezing strength in dB, overlap fidelity
with a displaced squeezed target, and Wigner quasi-probability grids.

Quadratures follow X_phi = (a e^{i phi} + a^dag e^{-i phi}) / 2, so the vacuum
standard deviation is 1/2 and [X_0, X_{pi/2}] = -i/2.  The variance of X_phi
is a sinusoid in 2*phi and is therefore fully determined by the moment matrix
of the pair (X_0, X_{pi/2}); extremal deviations come from its eigenvalues.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .fock_space import (
    DensityMatrix,
    SqueezeTarget,
    annihilation_op,
    displacement_op,
    squeeze_op,
)

__all__ = [
    "QuadratureStats",
    "WignerGrid",
    "quad_stats",
    "squeezing_db",
    "fidelity",
    "wigner",
    "write_wigner_csv",
]

_DB_PER_NEPER = 20.0 / math.log(10.0)


def squeezing_db(delta: float) -> float:
    """Squeezing strength in dB for a quadrature standard deviation.

    Zero for the vacuum value 1/2, positive for squeezed (smaller) deviations:
    delta = e^{-r}/2 maps to (20/ln 10) * r.
    """
    if delta <= 0.0:
        raise ValueError(f"quadrature deviation must be positive, got {delta}")
    return -_DB_PER_NEPER * math.log(2.0 * delta)


@dataclass(frozen=True)
class QuadratureStats:
    """Second-moment summary of one oscillator state.

    ``var_matrix`` holds the central second moments of (X_0, X_{pi/2});
    ``delta_min``/``delta_max`` are the square roots of its eigenvalues,
    ``phi_min`` the quadrature angle of minimum deviation in [0, pi), and
    ``r_eff_db`` the squeezing strength of ``delta_min`` in dB.
    """

    mean_x0: float
    mean_xpi2: float
    var_matrix: np.ndarray
    delta_min: float
    delta_max: float
    phi_min: float
    r_eff_db: float
    purity: float
    uncertainty_product: float

    def __post_init__(self) -> None:
        v = np.asarray(self.var_matrix, dtype=float)
        if v.shape != (2, 2):
            raise ValueError(f"var_matrix must be 2x2, got {v.shape}")
        if abs(v[0, 1] - v[1, 0]) > 1e-12:
            raise ValueError("var_matrix must be symmetric")
        if np.linalg.eigvalsh(v)[0] < -1e-9:
            raise ValueError("var_matrix must be positive semi-definite")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "var_matrix", v)
        if self.delta_min > self.delta_max + 1e-12:
            raise ValueError("delta_min exceeds delta_max")
        if not 0.0 <= self.phi_min < np.pi:
            raise ValueError(f"phi_min must lie in [0, pi), got {self.phi_min}")
        if self.uncertainty_product < 0.25 - 1e-6:
            raise ValueError(
                "uncertainty product "
                f"{self.uncertainty_product} below the Heisenberg floor 1/4"
            )


@lru_cache(maxsize=8)
def _quad_family(dim: int) -> tuple[np.ndarray, ...]:
    # X_0, X_{pi/2}, their squares, and the symmetrized cross product.
    a = annihilation_op(dim - 1).entries
    ad = a.conj().T
    x0 = (a + ad) / 2.0
    x1 = (1j * a - 1j * ad) / 2.0
    mats = (x0, x1, x0 @ x0, x1 @ x1, (x0 @ x1 + x1 @ x0) / 2.0)
    for m in mats:
        m.setflags(write=False)
    return mats


def quad_stats(rho: DensityMatrix) -> QuadratureStats:
    """Quadrature means, moment matrix, and squeezing summary of a state."""
    return _stats_from_array(rho.entries)


def _stats_from_array(arr: np.ndarray) -> QuadratureStats:
    """quad_stats on a raw array; tr(ρA) as an elementwise sum, no matmuls.

    Safe for real-dtype arrays (trajectory recording inside hot loops).
    """
    x0, x1, x0sq, x1sq, cross = _quad_family(arr.shape[0])
    m0 = float(np.sum(arr * x0.T).real)
    m1 = float(np.sum(arr * x1.T).real)
    v00 = float(np.sum(arr * x0sq.T).real) - m0 * m0
    v11 = float(np.sum(arr * x1sq.T).real) - m1 * m1
    c01 = float(np.sum(arr * cross.T).real) - m0 * m1
    var = np.array([[v00, c01], [c01, v11]])
    lam, vec = np.linalg.eigh(var)
    lam = np.clip(lam, 0.0, None)
    delta_min = float(np.sqrt(lam[0]))
    delta_max = float(np.sqrt(lam[1]))
    phi_min = float(np.arctan2(vec[1, 0], vec[0, 0]) % np.pi)
    return QuadratureStats(
        mean_x0=m0,
        mean_xpi2=m1,
        var_matrix=var,
        delta_min=delta_min,
        delta_max=delta_max,
        phi_min=phi_min,
        r_eff_db=squeezing_db(delta_min),
        purity=float(np.sum(np.abs(arr) ** 2)),
        uncertainty_product=delta_min * delta_max,
    )


def fidelity(rho: DensityMatrix, target: SqueezeTarget, n_max: int) -> float:
    """Overlap <psi|rho|psi> with the displaced squeezed state D(alpha)S(zeta)|0>."""
    if rho.dim != n_max + 1:
        raise ValueError(
            f"state dimension {rho.dim} does not match n_max + 1 = {n_max + 1}"
        )
    psi = squeeze_op(target.zeta, n_max).entries[:, 0]
    psi = displacement_op(target.alpha, n_max).entries @ psi
    return float((psi.conj() @ rho.entries @ psi).real)


@dataclass(frozen=True)
class WignerGrid:
    """Wigner quasi-probability values on a rectangular grid in the alpha plane.

    ``values[i, j]`` is W(re_i + i * im_j) with the axes sampled uniformly over
    ``re_range`` and ``im_range`` at ``resolution`` points each.
    """

    re_range: tuple[float, float]
    im_range: tuple[float, float]
    resolution: int
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.resolution < 2:
            raise ValueError(f"resolution must be at least 2, got {self.resolution}")
        for lo, hi in (self.re_range, self.im_range):
            if not hi > lo:
                raise ValueError(f"grid range ({lo}, {hi}) must be increasing")
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.resolution, self.resolution):
            raise ValueError(
                f"values shape {v.shape} does not match resolution {self.resolution}"
            )
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def re_points(self) -> np.ndarray:
        return np.linspace(self.re_range[0], self.re_range[1], self.resolution)

    @property
    def im_points(self) -> np.ndarray:
        return np.linspace(self.im_range[0], self.im_range[1], self.resolution)

    def integral(self) -> float:
        """Riemann sum of the grid; close to 1 when the grid covers the state."""
        d_re = (self.re_range[1] - self.re_range[0]) / (self.resolution - 1)
        d_im = (self.im_range[1] - self.im_range[0]) / (self.resolution - 1)
        return float(np.sum(self.values) * d_re * d_im)


@lru_cache(maxsize=8)
def _displaced_parity_basis(dim: int) -> tuple[np.ndarray, ...]:
    # Eigenbases of the two Hermitian generators of displacement, plus parity.
    a = annihilation_op(dim - 1).entries
    ad = a.conj().T
    lam, v = np.linalg.eigh(1j * (ad - a))
    mu, w = np.linalg.eigh(a + ad)
    parity = (-1.0) ** np.arange(dim)
    for m in (lam, v, mu, w, parity):
        m.setflags(write=False)
    return lam, v, mu, w, parity


def wigner(
    rho: DensityMatrix,
    re_range: tuple[float, float] = (-2.5, 2.5),
    im_range: tuple[float, float] = (-2.5, 2.5),
    resolution: int = 81,
) -> WignerGrid:
    """Wigner function W(alpha) = (2/pi) tr(D(alpha) P D(alpha)^dag rho).

    The displacement is factorized as e^{x(a^dag - a)} e^{iy(a^dag + a)} (the
    scalar phase from the split cancels inside the parity sandwich), with both
    exponentials evaluated through one-time eigendecompositions of their
    Hermitian generators.  This keeps the grid exact at the truncation level
    and costs two dense products per grid line rather than per grid point.

    The truncation guard of the displacement operator applies to the farthest
    grid corner: the grid must satisfy max|alpha|^2 <= n_max / 4.
    """
    n_max = rho.dim - 1
    corner = max(abs(re_range[0]), abs(re_range[1])) ** 2
    corner += max(abs(im_range[0]), abs(im_range[1])) ** 2
    if corner > n_max / 4.0:
        raise ValueError(
            f"grid corner |alpha|^2 = {corner:.2f} exceeds the truncation "
            f"guard; requires n_max >= {math.ceil(4.0 * corner)}"
        )
    lam, v, mu, w, parity = _displaced_parity_basis(rho.dim)
    xs = np.linspace(re_range[0], re_range[1], resolution)
    ys = np.linspace(im_range[0], im_range[1], resolution)

    # K_x = E_x^dag rho E_x computed as v (phase * A * phase') v^dag with
    # A = v^dag rho v, so each x costs two dense products.
    a_rot = v.conj().T @ rho.entries @ v
    lam_diff = lam[:, None] - lam[None, :]
    k_stack = np.empty((resolution, rho.dim, rho.dim), dtype=complex)
    for i, x in enumerate(xs):
        k_stack[i] = v @ (a_rot * np.exp(1j * x * lam_diff)) @ v.conj().T

    b_rot = w.conj().T @ (parity[:, None] * w)
    mu_diff = mu[:, None] - mu[None, :]
    g_stack = np.empty((resolution, rho.dim, rho.dim), dtype=complex)
    for j, y in enumerate(ys):
        g_stack[j] = w @ (b_rot * np.exp(1j * y * mu_diff)) @ w.conj().T

    values = (2.0 / np.pi) * np.einsum(
        "yij,xji->xy", g_stack, k_stack
    ).real
    return WignerGrid(
        re_range=(float(re_range[0]), float(re_range[1])),
        im_range=(float(im_range[0]), float(im_range[1])),
        resolution=resolution,
        values=values,
    )


def write_wigner_csv(
    grid: WignerGrid, path, *, n_max: int, tail_mass: float
) -> None:
    """Serialize a Wigner grid as (re, im, w) rows.

    The leading comment line records the truncation level and the tail mass of
    the underlying state so downstream consumers can judge grid fidelity.
    """
    lines = [f"# n_max={n_max} tail_mass={tail_mass:.3e}", "re,im,w"]
    res = grid.resolution
    re_pts = grid.re_points
    im_pts = grid.im_points
    for i in range(res):
        for j in range(res):
            lines.append(
                f"{re_pts[i]:.9g},{im_pts[j]:.9g},{grid.values[i, j]:.9g}"
            )
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
