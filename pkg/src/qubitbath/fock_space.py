"""Operators on a truncated Fock space.

All numerics downstream live on the span of the number states |0⟩..|n_max⟩,
represented by dense complex matrices.  This module builds the ladder
operator a, the resonant-interaction blocks (cos θ_N and the sin-type
shift operators), displacement D(α) and squeeze S(ζ) exponentials, the
quadratures X_φ = (a e^{iφ} + a† e^{−iφ})/2 and the photon parity e^{iπN}.

Conventions
-----------
* θ_N denotes the diagonal operator θ√N, so cos θ_N has entries cos(θ√n).
* sin θ_N/√N is never materialised on its own (0/0 at n = 0); only the
  well-defined composites R = (sin θ_N/√N)·a† and L = a·(sin θ_N/√N) are
  exposed, built entry-wise.
* The top retained level keeps cos(θ√(n_max+1)) for cos θ_{N+I}; the
  truncation error this induces is monitored through the tail-mass check.

All container types are immutable values: their numpy buffers are frozen
at construction and can be shared freely between workers.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
from scipy.linalg import expm

#: Default number of retained Fock levels is DEFAULT_N_MAX + 1.
DEFAULT_N_MAX = 60

#: Number of top levels inspected by the tail-mass check, and the
#: population threshold above which a run is flagged as truncation-limited.
TAIL_LEVELS = 5
TAIL_LIMIT = 1e-6

#: Tolerances for DensityMatrix invariants.
TOL_HERM = 1e-10
TOL_TRACE = 1e-8
EIG_FLOOR = -1e-8

#: Squeeze magnitudes beyond this make the truncated basis untrustworthy.
R_CAP = 5.0


def _frozen_array(values, dtype=complex) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclasses.dataclass(frozen=True)
class FockOperator:
    """A dense complex matrix acting on the truncated oscillator space.

    dim is the number of retained levels, n_max + 1.  Entries are stored
    read-only; use ``.entries`` for linear algebra and ``dagger()`` for the
    adjoint.
    """

    dim: int
    entries: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.entries, dtype=complex)
        if arr.shape != (self.dim, self.dim):
            raise ValueError(
                f"operator entries must be {self.dim}x{self.dim}, got {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError("operator entries must be finite")
        object.__setattr__(self, "entries", _frozen_array(arr))

    def dagger(self) -> "FockOperator":
        return FockOperator(self.dim, self.entries.conj().T)


@dataclasses.dataclass(frozen=True)
class DensityMatrix:
    """A state ρ: Hermitian, unit trace, positive semi-definite.

    Construction enforces the three invariants (Hermiticity within 1e-10
    max-element, trace within 1e-8 of one, minimum eigenvalue ≥ −1e-8).
    Long-running iterations work on raw arrays and re-enter this type at
    recording points, which re-checks the invariants.
    """

    dim: int
    entries: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.entries, dtype=complex)
        if arr.shape != (self.dim, self.dim):
            raise ValueError(
                f"state entries must be {self.dim}x{self.dim}, got {arr.shape}"
            )
        herm_defect = float(np.max(np.abs(arr - arr.conj().T)))
        if herm_defect > TOL_HERM:
            raise ValueError(f"state is not Hermitian: defect {herm_defect:.3e}")
        tr = float(arr.trace().real)
        if abs(tr - 1.0) > TOL_TRACE:
            raise ValueError(f"state trace {tr!r} differs from 1 beyond {TOL_TRACE}")
        low = float(np.linalg.eigvalsh((arr + arr.conj().T) / 2.0)[0])
        if low < EIG_FLOOR:
            raise ValueError(f"state has negative eigenvalue {low:.3e}")
        object.__setattr__(self, "entries", _frozen_array(arr))


@dataclasses.dataclass(frozen=True)
class SqueezeTarget:
    """A displaced squeezed vacuum D(α)S(ζ)|0⟩ with ζ = r·e^{iφ_r}.

    r may be negative (the sign selects which quadrature ends up
    squeezed); φ_r is normalised into [0, 2π) at construction.
    """

    alpha: complex
    r: float
    phi_r: float

    def __post_init__(self):
        if not (math.isfinite(self.r) and math.isfinite(self.phi_r)):
            raise ValueError("target parameters must be finite")
        if abs(self.r) >= R_CAP:
            raise ValueError(f"|r| = {abs(self.r)} exceeds the cap {R_CAP}")
        object.__setattr__(self, "alpha", complex(self.alpha))
        object.__setattr__(self, "phi_r", float(self.phi_r) % (2.0 * math.pi))

    @property
    def zeta(self) -> complex:
        return self.r * complex(math.cos(self.phi_r), math.sin(self.phi_r))


@dataclasses.dataclass(frozen=True)
class ResonantBlocks:
    """The four building blocks of the resonant qubit-oscillator propagator.

    C      = cos θ_N          (diagonal)
    C_plus = cos θ_{N+I}      (diagonal)
    R      = (sin θ_N/√N)·a†  with ⟨n+1|R|n⟩ = sin(θ√(n+1))
    L      = a·(sin θ_N/√N)   with ⟨n−1|L|n⟩ = sin(θ√n)
    """

    C: FockOperator
    C_plus: FockOperator
    R: FockOperator
    L: FockOperator


def annihilation_op(n_max: int) -> FockOperator:
    """Ladder operator with ⟨n−1|a|n⟩ = √n on |0⟩..|n_max⟩."""
    if n_max < 1:
        raise ValueError(f"n_max must be at least 1, got {n_max}")
    dim = n_max + 1
    return FockOperator(dim, np.diag(np.sqrt(np.arange(1.0, dim)), k=1))


def resonant_blocks(theta: float, n_max: int) -> ResonantBlocks:
    """Blocks of the resonant interaction propagator for half-Rabi angle θ."""
    if n_max < 1:
        raise ValueError(f"n_max must be at least 1, got {n_max}")
    dim = n_max + 1
    n = np.arange(dim, dtype=float)
    sines = np.sin(theta * np.sqrt(n[1:]))  # sin(θ√n) for n = 1..n_max
    return ResonantBlocks(
        C=FockOperator(dim, np.diag(np.cos(theta * np.sqrt(n)))),
        C_plus=FockOperator(dim, np.diag(np.cos(theta * np.sqrt(n + 1.0)))),
        R=FockOperator(dim, np.diag(sines, k=-1)),
        L=FockOperator(dim, np.diag(sines, k=1)),
    )


def displacement_op(alpha: complex, n_max: int) -> FockOperator:
    """D(α) = exp(α a† − α* a) on the truncated basis.

    Guard: |α|² ≤ n_max/4, so the displaced vacuum keeps negligible weight
    near the truncation edge.
    """
    alpha = complex(alpha)
    if abs(alpha) ** 2 > n_max / 4.0:
        needed = math.ceil(4.0 * abs(alpha) ** 2)
        raise ValueError(
            f"displacement |alpha|^2 = {abs(alpha)**2:.3f} breaks the truncation "
            f"guard; this alpha requires n_max >= {needed}"
        )
    a = annihilation_op(n_max).entries
    return FockOperator(n_max + 1, expm(alpha * a.conj().T - np.conj(alpha) * a))


def squeeze_op(zeta: complex, n_max: int) -> FockOperator:
    """S(ζ) = exp(½(ζ* a² − ζ a†²)) on the truncated basis.

    Guard: e^{2|ζ|} ≤ n_max/4 (the squeezed vacuum's exponential photon
    spread must fit well inside the basis).
    """
    zeta = complex(zeta)
    if math.exp(2.0 * abs(zeta)) > n_max / 4.0:
        needed = math.ceil(4.0 * math.exp(2.0 * abs(zeta)))
        raise ValueError(
            f"squeeze |zeta| = {abs(zeta):.3f} breaks the truncation guard; "
            f"this zeta requires n_max >= {needed}"
        )
    a = annihilation_op(n_max).entries
    a2 = a @ a
    return FockOperator(
        n_max + 1, expm(0.5 * (np.conj(zeta) * a2 - zeta * a2.conj().T))
    )


def quadrature_op(phi: float, n_max: int) -> FockOperator:
    """X_φ = (a e^{iφ} + a† e^{−iφ})/2; vacuum variance 1/4."""
    a = annihilation_op(n_max).entries
    phase = complex(math.cos(phi), math.sin(phi))
    return FockOperator(n_max + 1, (a * phase + a.conj().T * np.conj(phase)) / 2.0)


def parity_op(n_max: int) -> FockOperator:
    """Photon parity e^{iπN}: diagonal entries (−1)^n."""
    signs = np.where(np.arange(n_max + 1) % 2 == 0, 1.0, -1.0)
    return FockOperator(n_max + 1, np.diag(signs))


def vacuum_state(n_max: int) -> DensityMatrix:
    """|0⟩⟨0| as a DensityMatrix on n_max + 1 levels."""
    rho = np.zeros((n_max + 1, n_max + 1), dtype=complex)
    rho[0, 0] = 1.0
    return DensityMatrix(n_max + 1, rho)


def tail_mass(state, levels: int = TAIL_LEVELS) -> float:
    """Total population in the top ``levels`` retained Fock levels.

    Accepts a DensityMatrix or a raw square array.  For states on a
    qubit ⊗ oscillator product, pass the oscillator-reduced state.
    """
    arr = state.entries if isinstance(state, DensityMatrix) else np.asarray(state)
    pops = np.diagonal(arr).real
    return float(np.sum(pops[-levels:]))
