"""Quantum-channel machinery.

Builds the resonant qubit-oscillator propagator, extracts Kraus operators
from unitary dilations (pure or mixed ancilla), applies channels, integrates
Lindblad master equations with fixed-step RK4, and iterates channels to
their fixed points.

Tensor order is fixed globally as (newest qubit) ⊗ (older qubit) ⊗
(oscillator); every Kraus extraction in the package uses this order.

Truncation note: propagators assembled from resonant blocks are exact
isometries column-wise except at the top oscillator level, so completeness
defects are evaluated on a guarded subspace that drops a few top levels
(the callers choose the guard band; results record the defect).
"""

from __future__ import annotations

import dataclasses
import math
from typing import Callable, Sequence

import numpy as np

from .fock_space import DensityMatrix, FockOperator, resonant_blocks

#: Default successive-iterate trace-norm tolerance for fixed points.
FIXED_POINT_TOL = 1e-8


@dataclasses.dataclass(frozen=True)
class KrausMap:
    """An ordered family {M_k} defining ρ ↦ Σ M_k ρ M_k†.

    completeness_defect records ‖Σ M†M − I‖ (spectral norm) as evaluated by
    the builder — on the guarded subspace for unitary-dilation maps, on the
    full space for first-order maps that are intentionally non-trace-
    preserving (which document their larger defect).
    """

    ops: tuple[FockOperator, ...]
    completeness_defect: float

    def __post_init__(self):
        if not self.ops:
            raise ValueError("a Kraus map needs at least one operator")
        dims = {op.dim for op in self.ops}
        if len(dims) != 1:
            raise ValueError(f"Kraus operators disagree on dimension: {sorted(dims)}")
        if not (math.isfinite(self.completeness_defect) and self.completeness_defect >= 0):
            raise ValueError("completeness_defect must be finite and non-negative")
        object.__setattr__(self, "ops", tuple(self.ops))

    @property
    def dim(self) -> int:
        return self.ops[0].dim


@dataclasses.dataclass(frozen=True)
class LindbladModel:
    """dρ/dτ = −i[H, ρ] + Σ_j (L_j ρ L_j† − ½{L_j†L_j, ρ})."""

    H: FockOperator
    dissipators: tuple[FockOperator, ...]

    def __post_init__(self):
        herm = float(np.max(np.abs(self.H.entries - self.H.entries.conj().T)))
        if herm > 1e-10:
            raise ValueError(f"Hamiltonian is not Hermitian: defect {herm:.3e}")
        for l in self.dissipators:
            if l.dim != self.H.dim:
                raise ValueError("dissipator dimension differs from Hamiltonian")
        object.__setattr__(self, "dissipators", tuple(self.dissipators))


@dataclasses.dataclass(frozen=True)
class FixedPointResult:
    state: DensityMatrix
    iterations: int
    converged: bool
    residual: float


def guard_mask(total_dim: int, osc_dim: int, guard_levels: int) -> np.ndarray:
    """Boolean mask excluding the top ``guard_levels`` oscillator levels.

    Works on any space of shape (k tensor factors) ⊗ (oscillator), i.e.
    total_dim = k · osc_dim with the oscillator index fastest.
    """
    if total_dim % osc_dim != 0:
        raise ValueError(f"total dim {total_dim} is not a multiple of {osc_dim}")
    keep = np.arange(osc_dim) < osc_dim - guard_levels
    return np.tile(keep, total_dim // osc_dim)


def completeness_defect(
    ops: Sequence[np.ndarray], mask: np.ndarray | None = None
) -> float:
    """Spectral norm of Σ M†M − I, optionally restricted to a masked block."""
    dim = ops[0].shape[0]
    s = np.zeros((dim, dim), dtype=complex)
    for m in ops:
        s += m.conj().T @ m
    e = s - np.eye(dim)
    if mask is not None:
        e = e[np.ix_(mask, mask)]
    return float(np.linalg.norm(e, 2))


def resonant_propagator(theta: float, n_max: int) -> FockOperator:
    """One resonant qubit-oscillator interaction over half-Rabi angle θ.

    Block form on (qubit ⊗ oscillator), qubit basis (g, e):

        U_r = |g⟩⟨g|⊗C + |e⟩⟨e|⊗C_plus − |e⟩⟨g|⊗L + |g⟩⟨e|⊗R
    """
    if n_max < 2:
        raise ValueError(f"n_max must be at least 2, got {n_max}")
    b = resonant_blocks(theta, n_max)
    dim = n_max + 1
    u = np.zeros((2 * dim, 2 * dim), dtype=complex)
    u[:dim, :dim] = b.C.entries  # ⟨g|·|g⟩
    u[dim:, dim:] = b.C_plus.entries  # ⟨e|·|e⟩
    u[dim:, :dim] = -b.L.entries  # ⟨e|·|g⟩
    u[:dim, dim:] = b.R.entries  # ⟨g|·|e⟩
    return FockOperator(2 * dim, u)


def kraus_from_dilation(
    U: FockOperator | np.ndarray,
    ancilla_in: DensityMatrix,
    ancilla_basis: np.ndarray | None = None,
    *,
    mask: np.ndarray | None = None,
) -> KrausMap:
    """Kraus operators of tr_anc[U (ρ_anc ⊗ ρ) U†] read out in a basis.

    The ancilla factor is the leading tensor slot of U.  For a pure ancilla
    |ψ⟩⟨ψ| the operators are M_k = ⟨k|U|ψ⟩; a mixed ancilla is spectrally
    decomposed and contributes √p_i ⟨k|U|ψ_i⟩ for every (k, i).

    ``mask`` selects the guarded system subspace on which the completeness
    defect is evaluated (default: full space).
    """
    u = U.entries if isinstance(U, FockOperator) else np.asarray(U, dtype=complex)
    total = u.shape[0]
    if u.shape != (total, total):
        raise ValueError("dilation unitary must be square")
    d_anc = ancilla_in.dim
    if total % d_anc != 0:
        raise ValueError(
            f"dilation dim {total} is not divisible by ancilla dim {d_anc}"
        )
    d_sys = total // d_anc

    if ancilla_basis is None:
        basis = np.eye(d_anc, dtype=complex)
    else:
        basis = np.asarray(ancilla_basis, dtype=complex)
        if basis.shape != (d_anc, d_anc):
            raise ValueError("ancilla basis must be square over the ancilla space")
        gram = basis.conj().T @ basis
        if np.max(np.abs(gram - np.eye(d_anc))) > 1e-10:
            raise ValueError("ancilla basis is not orthonormal")

    probs, vecs = np.linalg.eigh(ancilla_in.entries)
    u4 = u.reshape(d_anc, d_sys, d_anc, d_sys)
    ops = []
    for k in range(d_anc):
        bra = basis[:, k].conj()
        for i in range(d_anc):
            p = float(probs[i])
            if p <= 1e-14:
                continue
            m = math.sqrt(p) * np.einsum("a,asbt,b->st", bra, u4, vecs[:, i])
            ops.append(FockOperator(d_sys, m))
    defect = completeness_defect([op.entries for op in ops], mask)
    return KrausMap(ops=tuple(ops), completeness_defect=defect)


def _apply_kraus(ops: Sequence[np.ndarray], rho: np.ndarray) -> np.ndarray:
    """Σ M ρ M† with an exact Hermitian symmetrization of the result."""
    out = np.zeros_like(rho)
    for m in ops:
        out += m @ rho @ m.conj().T
    return (out + out.conj().T) / 2.0


def apply_channel(
    kmap: KrausMap, rho: DensityMatrix, *, renormalize: bool = False
) -> DensityMatrix:
    """One application of the channel; trace change ≤ defect + tail mass.

    ``renormalize`` divides by the output trace; use it for first-order
    (intentionally non-trace-preserving) maps like photon decay.
    """
    if kmap.dim != rho.dim:
        raise ValueError(f"channel dim {kmap.dim} does not match state dim {rho.dim}")
    out = _apply_kraus([op.entries for op in kmap.ops], rho.entries)
    if renormalize:
        out = out / out.trace().real
    return DensityMatrix(rho.dim, out)


def _lindblad_rhs(
    h: np.ndarray, ls: Sequence[np.ndarray], lls: Sequence[np.ndarray], rho: np.ndarray
) -> np.ndarray:
    out = -1j * (h @ rho - rho @ h)
    for l, ll in zip(ls, lls):
        out += l @ rho @ l.conj().T - 0.5 * (ll @ rho + rho @ ll)
    return out


def default_lindblad_dt(model: LindbladModel) -> float:
    """Conservative default step: min(0.05, 0.05 / max_j ‖L_j‖²)."""
    worst = 0.0
    for l in model.dissipators:
        worst = max(worst, float(np.linalg.norm(l.entries, 2)) ** 2)
    return 0.05 if worst == 0.0 else min(0.05, 0.05 / worst)


def integrate_lindblad(
    model: LindbladModel,
    rho0: DensityMatrix,
    duration: float,
    dt: float | None = None,
) -> DensityMatrix:
    """Fixed-step RK4 integration of the master equation over ``duration``.

    dt defaults to the conservative rule of default_lindblad_dt; pass an
    explicit dt when only stability (not accuracy) binds.  The final state
    is renormalized to kill the accumulated trace round-off.
    """
    if dt is None:
        dt = default_lindblad_dt(model)
    if dt <= 0:
        raise ValueError("dt must be positive")
    if duration < dt:
        raise ValueError("duration must be at least dt")
    n_steps = max(1, math.ceil(duration / dt - 1e-12))
    h_eff = duration / n_steps

    h = model.H.entries
    ls = [l.entries for l in model.dissipators]
    lls = [l.conj().T @ l for l in ls]
    rho = np.array(rho0.entries, dtype=complex)
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(n_steps):
            k1 = _lindblad_rhs(h, ls, lls, rho)
            k2 = _lindblad_rhs(h, ls, lls, rho + 0.5 * h_eff * k1)
            k3 = _lindblad_rhs(h, ls, lls, rho + 0.5 * h_eff * k2)
            k4 = _lindblad_rhs(h, ls, lls, rho + h_eff * k3)
            rho = rho + (h_eff / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(rho.view(float))):
                raise RuntimeError(
                    f"Lindblad integration blew up at step {step + 1}/{n_steps} "
                    f"(dt = {h_eff:.3e})"
                )
    rho = (rho + rho.conj().T) / 2.0
    return DensityMatrix(rho0.dim, rho / rho.trace().real)


def trace_norm(delta: np.ndarray) -> float:
    """Sum of singular values (Schatten 1-norm)."""
    return float(np.sum(np.linalg.svd(delta, compute_uv=False)))


def _trace_norm_below(delta: np.ndarray, tol: float) -> tuple[bool, float]:
    """Decide trace_norm(delta) < tol, dodging the SVD when bounds settle it.

    ‖·‖_F ≤ ‖·‖_tr ≤ √d·‖·‖_F, so most iterations need only a Frobenius
    norm; the exact number is computed only in the narrow undecided band.
    """
    fro = float(np.linalg.norm(delta))
    if fro >= tol:
        return False, fro
    d = delta.shape[0]
    upper = math.sqrt(d) * fro
    if upper < tol:
        return True, upper
    tn = trace_norm(delta)
    return tn < tol, tn


def fixed_point(
    step: Callable[[DensityMatrix], DensityMatrix],
    rho0: DensityMatrix,
    tol: float = FIXED_POINT_TOL,
    max_iters: int = 50_000,
) -> FixedPointResult:
    """Iterate a channel-application closure until successive iterates are
    closer than ``tol`` in trace norm.

    Non-convergence is flagged, not raised — the caller decides.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    current = rho0
    residual = math.inf
    for i in range(1, max_iters + 1):
        nxt = step(current)
        done, residual = _trace_norm_below(nxt.entries - current.entries, tol)
        current = nxt
        if done:
            return FixedPointResult(current, i, True, residual)
    return FixedPointResult(current, max_iters, False, residual)
