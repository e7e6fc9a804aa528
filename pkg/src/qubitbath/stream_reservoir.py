"""Reservoir driven by one continuously entangled qubit stream.

Instead of disjoint pairs, every qubit is entangled with both its
predecessor and its successor by a fixed two-qubit gate applied once per
time step.  Keeping one qubit in joint state with the oscillator makes the
dynamics Markovian again: a two-operator Kraus map advances (qubit,
oscillator) by one step.

The joint step commutes with flipping the qubit between the |+>/|-> basis
states while rotating the oscillator phase space by pi.  Splitting the
joint state along that symmetry halves the simulation cost: the dynamics
closes on a pair (rho_D, rho_O) of oscillator-space matrices, evolved by
two fixed superoperators and parity conjugations.  Small-angle
perturbation theory then gives closed steady-state formulas, including the
entangling angle of strongest squeezing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize_scalar

from .channels import KrausMap, completeness_defect, guard_mask, trace_norm
from .fock_space import (
    DEFAULT_N_MAX,
    TAIL_LIMIT,
    DensityMatrix,
    FockOperator,
    resonant_blocks,
    tail_mass,
    vacuum_state,
)
from .observables import QuadratureStats, _stats_from_array

__all__ = [
    "JointState",
    "ReducedStreamState",
    "StreamRun",
    "StreamSteadyPrediction",
    "embed",
    "entangler",
    "find_optimal_phi",
    "lift_and_project",
    "mps_coefficients",
    "perturbative_steady",
    "phi_map",
    "reduced_step",
    "simulate_stream_reservoir",
    "stream_kraus",
    "stream_step",
    "upsilon_map",
]

_SYM_TOL = 1e-8


@dataclass(frozen=True)
class JointState:
    """State of (active qubit) ⊗ (oscillator) just before their interaction."""

    rho: DensityMatrix

    def __post_init__(self) -> None:
        if self.rho.dim % 2 != 0:
            raise ValueError(f"joint state needs an even dimension, got {self.rho.dim}")

    @property
    def osc_dim(self) -> int:
        return self.rho.dim // 2

    def oscillator(self) -> DensityMatrix:
        """Partial trace over the qubit factor."""
        d = self.osc_dim
        arr = self.rho.entries
        return DensityMatrix(d, arr[:d, :d] + arr[d:, d:])

    def osc_tail_mass(self, levels: int | None = None) -> float:
        """Population of the top oscillator levels; large values mean the
        truncation is no longer trustworthy."""
        if levels is None:
            return tail_mass(self.oscillator())
        return tail_mass(self.oscillator(), levels)


@dataclass(frozen=True)
class ReducedStreamState:
    """Symmetry-reduced stream state: a density part and an overlap part.

    ``rho_D`` is a genuine oscillator state; ``rho_O`` is Hermitian but not
    necessarily positive — it carries the interference between the two
    symmetry sectors.
    """

    rho_D: DensityMatrix
    rho_O: FockOperator

    def __post_init__(self) -> None:
        if self.rho_O.dim != self.rho_D.dim:
            raise ValueError("rho_D and rho_O must share one oscillator space")
        o = self.rho_O.entries
        if np.max(np.abs(o - o.conj().T)) > 1e-10:
            raise ValueError("rho_O must be Hermitian within 1e-10")


@dataclass(frozen=True)
class StreamSteadyPrediction:
    """Leading-order steady quadrature summary of the stream reservoir."""

    x0_mean: float
    xpi2_mean: float
    delta_xpi2: float
    phi: float
    theta: float

    def __post_init__(self) -> None:
        if self.delta_xpi2 <= 0.0:
            raise ValueError("delta_xpi2 must be positive")


@dataclass(frozen=True)
class StreamRun:
    """Iteration record of the reduced stream dynamics."""

    trajectory: tuple[QuadratureStats, ...]
    final: ReducedStreamState
    steps_taken: int
    converged: bool
    residual: float
    tail_mass: float
    tail_ok: bool


def entangler(phi: float) -> np.ndarray:
    """Two-qubit gate cos φ · I − i sin φ · σ_y⊗σ_x entangling neighbours.

    The first tensor factor is the later qubit (the one that stays), the
    second the earlier one.  The Pauli phase convention σ_y|g> = i|e> makes
    all amplitudes generated from |gg> real: U|gg> = cos φ|gg> + sin φ|ee>.
    """
    c, s = math.cos(phi), math.sin(phi)
    return np.array(
        [
            [c, 0.0, 0.0, -s],
            [0.0, c, -s, 0.0],
            [0.0, s, c, 0.0],
            [s, 0.0, 0.0, c],
        ],
        dtype=complex,
    )


@lru_cache(maxsize=32)
def _stream_ops(phi: float, theta: float, n_max: int) -> tuple[np.ndarray, np.ndarray]:
    dim = n_max + 1
    b = resonant_blocks(theta, n_max)
    c, s = math.cos(phi), math.sin(phi)
    keep = np.array([[c, 0.0], [0.0, s]])   # cos|g><g| + sin|e><e|
    swap = np.array([[0.0, c], [s, 0.0]])   # cos|g><e| + sin|e><g|
    m_g = np.kron(keep, b.C.entries) + np.kron(swap, b.R.entries)
    m_e = np.kron(swap, b.C_plus.entries) - np.kron(keep, b.L.entries)
    m_g.setflags(write=False)
    m_e.setflags(write=False)
    return m_g, m_e


def stream_kraus(phi: float, theta: float, n_max: int = DEFAULT_N_MAX) -> KrausMap:
    """The one-step Kraus pair {M_g, M_e} on (active qubit) ⊗ (oscillator).

    M_g/M_e combine the qubit relabelling by the entangler with the resonant
    interaction blocks; the dyad bra side is the outgoing qubit, the ket
    side the incoming one.  Complete on the oscillator levels below the top
    two (the raising block is cut at the truncation edge).
    """
    dim = n_max + 1
    m_g, m_e = _stream_ops(float(phi), float(theta), int(n_max))
    defect = completeness_defect([m_g, m_e], guard_mask(2 * dim, dim, 2))
    return KrausMap(
        ops=(FockOperator(2 * dim, m_g), FockOperator(2 * dim, m_e)),
        completeness_defect=defect,
    )


def stream_step(s: JointState, phi: float, theta: float) -> JointState:
    """Advance the joint state by one qubit: entangle, interact, drop.

    The outgoing qubit slot is reused for the next one.  Probability lost
    through the top oscillator level is renormalized away; states with an
    empty top level lose exactly nothing.  Check ``osc_tail_mass`` to see
    whether the truncation is still adequate.
    """
    n_max = s.osc_dim - 1
    m_g, m_e = _stream_ops(float(phi), float(theta), n_max)
    rho = s.rho.entries
    out = m_g @ rho @ m_g.conj().T + m_e @ rho @ m_e.conj().T
    out = (out + out.conj().T) / 2.0
    out /= np.trace(out).real
    return JointState(DensityMatrix(s.rho.dim, out))


@lru_cache(maxsize=16)
def _parity_signs(dim: int) -> np.ndarray:
    signs = np.where(np.arange(dim) % 2 == 0, 1.0, -1.0)
    signs.setflags(write=False)
    return signs


def _parity_conj(mat: np.ndarray) -> np.ndarray:
    s = _parity_signs(mat.shape[0])
    return mat * np.outer(s, s)


def lift_and_project(s: JointState) -> ReducedStreamState:
    """Split a symmetric joint state into its (rho_D, rho_O) components.

    Requires the flip-and-rotate symmetry: the |+>/|-> diagonal blocks must
    be parity conjugates and the off-diagonal block parity-Hermitian, both
    within 1e-8.
    """
    d = s.osc_dim
    arr = s.rho.entries
    h = np.kron(np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2.0), np.eye(d))
    pm = h @ arr @ h
    rho_pp = pm[:d, :d]
    rho_po = pm[:d, d:]
    rho_mm = pm[d:, d:]
    if np.max(np.abs(rho_pp - _parity_conj(rho_mm))) > _SYM_TOL:
        raise ValueError(
            "joint state breaks the flip-and-rotate symmetry (diagonal blocks)"
        )
    signs = _parity_signs(d)
    rho_o = 2.0 * rho_po * signs[np.newaxis, :]
    if np.max(np.abs(rho_o - rho_o.conj().T)) > _SYM_TOL:
        raise ValueError(
            "joint state breaks the flip-and-rotate symmetry (overlap block)"
        )
    rho_o = (rho_o + rho_o.conj().T) / 2.0
    return ReducedStreamState(
        rho_D=DensityMatrix(d, 2.0 * rho_pp),
        rho_O=FockOperator(d, rho_o),
    )


def embed(r: ReducedStreamState) -> JointState:
    """Rebuild the symmetric joint state from its reduced components."""
    d = r.rho_D.dim
    signs = _parity_signs(d)
    rho_pp = r.rho_D.entries / 2.0
    rho_mm = _parity_conj(rho_pp)
    rho_po = (r.rho_O.entries * signs[np.newaxis, :]) / 2.0
    pm = np.block([[rho_pp, rho_po], [rho_po.conj().T, rho_mm]])
    h = np.kron(np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2.0), np.eye(d))
    return JointState(DensityMatrix(2 * d, h @ pm @ h))


@lru_cache(maxsize=32)
def _displacing_pair(theta: float, dim: int) -> tuple[np.ndarray, np.ndarray]:
    # (C + R)/sqrt(2) and (C_plus - L)/sqrt(2): the two halves of a resonant
    # interaction with a qubit prepared on the symmetry axis.
    b = resonant_blocks(theta, dim - 1)
    a_plus = (b.C.entries + b.R.entries) / math.sqrt(2.0)
    b_plus = (b.C_plus.entries - b.L.entries) / math.sqrt(2.0)
    a_plus.setflags(write=False)
    b_plus.setflags(write=False)
    return a_plus, b_plus


def phi_map(rho: FockOperator, theta: float) -> FockOperator:
    """Trace-preserving half of the reduced step: both branches added."""
    a_plus, b_plus = _displacing_pair(float(theta), rho.dim)
    m = rho.entries
    out = a_plus @ m @ a_plus.conj().T + b_plus @ m @ b_plus.conj().T
    return FockOperator(rho.dim, out)


def upsilon_map(rho: FockOperator, theta: float) -> FockOperator:
    """Interference half of the reduced step: branch difference, not trace
    preserving (its trace is O(theta) on centred states)."""
    a_plus, b_plus = _displacing_pair(float(theta), rho.dim)
    m = rho.entries
    out = a_plus @ m @ a_plus.conj().T - b_plus @ m @ b_plus.conj().T
    return FockOperator(rho.dim, out)


def _reduced_step_arrays(
    rho_d: np.ndarray, rho_o: np.ndarray, phi: float, theta: float, dim: int
) -> tuple[np.ndarray, np.ndarray]:
    a_plus, b_plus = _displacing_pair(theta, dim)
    ta = a_plus @ rho_d @ a_plus.conj().T
    tb = b_plus @ rho_d @ b_plus.conj().T
    f = ta + tb
    ya = a_plus @ rho_o @ a_plus.conj().T
    yb = b_plus @ rho_o @ b_plus.conj().T
    y = ya - yb
    s2 = math.sin(2.0 * phi)
    cross = math.cos(2.0 * phi) / 2.0
    signs = _parity_signs(dim)
    f_conj = _parity_conj(f)
    y_conj = _parity_conj(y)
    y_right = y * signs[np.newaxis, :]
    y_left = y * signs[:, np.newaxis]
    f_right = f * signs[np.newaxis, :]
    f_left = f * signs[:, np.newaxis]
    new_d = 0.5 * (1.0 + s2) * f + 0.5 * (1.0 - s2) * f_conj + cross * (y_left + y_right)
    new_o = 0.5 * (1.0 + s2) * y + 0.5 * (1.0 - s2) * y_conj + cross * (f_left + f_right)
    return new_d, new_o


def reduced_step(r: ReducedStreamState, phi: float, theta: float) -> ReducedStreamState:
    """One step of the symmetry-reduced dynamics, exactly as the update rules read."""
    dim = r.rho_D.dim
    new_d, new_o = _reduced_step_arrays(
        r.rho_D.entries, r.rho_O.entries, float(phi), float(theta), dim
    )
    new_d = (new_d + new_d.conj().T) / 2.0
    new_o = (new_o + new_o.conj().T) / 2.0
    return ReducedStreamState(
        rho_D=DensityMatrix(dim, new_d), rho_O=FockOperator(dim, new_o)
    )


def simulate_stream_reservoir(
    phi: float,
    theta: float,
    *,
    n_max: int = DEFAULT_N_MAX,
    steps: int = 200_000,
    tol: float = 1e-8,
    record_every: int = 0,
    initial: ReducedStreamState | None = None,
) -> StreamRun:
    """Iterate the reduced dynamics from the ground stream until stationary.

    The start state is the lift of |g><g| ⊗ |0><0| (rho_D = rho_O = vacuum)
    unless ``initial`` is given.  Convergence is declared when the combined
    trace norm of the per-step change of both components drops below
    ``tol``.  Both components are rescaled by the trace of rho_D every step
    so that truncation-edge leakage cannot accumulate; the loop stays in
    real arithmetic when possible, and statistics are computed from rho_D.
    """
    if steps < 1:
        raise ValueError(f"steps must be at least 1, got {steps}")
    if record_every < 0:
        raise ValueError(f"record_every must be non-negative, got {record_every}")
    dim = n_max + 1
    if initial is None:
        rho_d = vacuum_state(n_max).entries.copy()
        rho_o = vacuum_state(n_max).entries.copy()
    else:
        if initial.rho_D.dim != dim:
            raise ValueError(
                f"initial state dim {initial.rho_D.dim} does not match n_max + 1 = {dim}"
            )
        rho_d = initial.rho_D.entries.copy()
        rho_o = initial.rho_O.entries.copy()
    if np.max(np.abs(rho_d.imag)) == 0.0 and np.max(np.abs(rho_o.imag)) == 0.0:
        rho_d, rho_o = rho_d.real.copy(), rho_o.real.copy()

    phi_f, theta_f = float(phi), float(theta)
    trajectory: list[QuadratureStats] = []
    converged = False
    residual = math.inf
    taken = 0
    for step in range(1, steps + 1):
        new_d, new_o = _reduced_step_arrays(rho_d, rho_o, phi_f, theta_f, dim)
        tr = np.trace(new_d).real
        new_d /= tr
        new_o /= tr
        delta_d = new_d - rho_d
        delta_o = new_o - rho_o
        rho_d, rho_o = new_d, new_o
        taken = step
        if record_every and step % record_every == 0:
            trajectory.append(_stats_from_array(rho_d))
        # cheap reject: the trace norm dominates the Frobenius norm
        frob = math.sqrt(
            float(np.sum(np.abs(delta_d) ** 2)) + float(np.sum(np.abs(delta_o) ** 2))
        )
        if frob <= tol:
            residual = trace_norm(delta_d) + trace_norm(delta_o)
            if residual < tol:
                converged = True
                break
    if not converged and taken == steps:
        residual = trace_norm(delta_d) + trace_norm(delta_o)

    if not trajectory or not record_every or taken % record_every != 0:
        trajectory.append(_stats_from_array(rho_d))
    final = ReducedStreamState(
        rho_D=DensityMatrix(dim, rho_d.astype(complex)),
        rho_O=FockOperator(dim, rho_o.astype(complex)),
    )
    tail = tail_mass(final.rho_D)
    return StreamRun(
        trajectory=tuple(trajectory),
        final=final,
        steps_taken=taken,
        converged=converged,
        residual=residual,
        tail_mass=tail,
        tail_ok=tail <= TAIL_LIMIT,
    )


def perturbative_steady(phi: float, theta: float) -> StreamSteadyPrediction:
    """Leading-order steady means and squeezed deviation of the stream.

    <X_0> grows like theta; the deviation of X_{pi/2} is theta-free at this
    order.  Diverges as phi approaches pi/4, where the state drifts off
    instead of settling; the guard reports that explicitly.
    """
    if not abs(phi) < math.pi / 4:
        raise ValueError(
            f"phi must satisfy |phi| < pi/4; at {phi} the state drifts without settling"
        )
    s2 = math.sin(2.0 * phi)
    c2 = math.cos(2.0 * phi)
    radicand = 1.0 - 2.0 * s2 * c2 * c2
    if radicand <= 0.0:
        raise ValueError(f"deviation formula loses validity: radicand {radicand} <= 0")
    return StreamSteadyPrediction(
        x0_mean=theta * s2 / (2.0 * (1.0 - s2)),
        xpi2_mean=0.0,
        delta_xpi2=math.sqrt(radicand / (4.0 * c2 * c2)),
        phi=phi,
        theta=theta,
    )


def find_optimal_phi() -> tuple[float, float]:
    """Entangling angle minimizing the predicted deviation, with its value."""

    def objective(phi: float) -> float:
        return perturbative_steady(phi, 0.0).delta_xpi2

    res = minimize_scalar(
        objective, bracket=(0.05, 0.28, 0.75), method="golden", options={"xtol": 1e-6}
    )
    return float(res.x), float(res.fun)


def mps_coefficients(phi: float, n_qubits: int) -> dict[str, complex]:
    """Amplitudes of an n-qubit stream segment after the entangling chain.

    Qubits start in the ground state and the gate acts on (1,2), (2,3), …
    in order, each later qubit on the gate's first slot.  Keys are strings
    like "ggeeg" with qubit 1 leftmost.
    """
    if not 2 <= n_qubits <= 12:
        raise ValueError(f"n_qubits must lie in [2, 12], got {n_qubits}")
    gate = entangler(phi).reshape(2, 2, 2, 2)  # [new', old', new, old]
    amp = np.zeros((2,) * n_qubits, dtype=complex)
    amp[(0,) * n_qubits] = 1.0
    for t in range(n_qubits - 1):
        # qubit t+1 on axis t (older), qubit t+2 on axis t+1 (newer)
        amp = np.tensordot(gate, amp, axes=([2, 3], [t + 1, t]))
        amp = np.moveaxis(amp, [0, 1], [t + 1, t])
    out: dict[str, complex] = {}
    for idx in np.ndindex(amp.shape):
        out["".join("ge"[b] for b in idx)] = complex(amp[idx])
    return out
