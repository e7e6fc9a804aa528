"""Stabilization of squeezed oscillator states by a stream of entangled qubit pairs.

One pair at a time crosses the interaction zone: the first qubit undergoes the
resonant exchange propagator, then the second, and both are discarded.  Tracing
them out leaves a four-operator Kraus channel on the oscillator.  For small
half-Rabi angle theta the channel is captured by a Lindblad generator whose
dominant dissipator is a squeezed annihilation operator, so a properly tuned
pair amplitude vector relaxes the oscillator onto a displaced squeezed state.

The tuning calculator inverts that picture: given a displaced squeezed target
it returns the pair amplitudes, the predicted convergence rate kappa (per
adimensional time tau = number of pairs x 2 theta^2), and the target itself.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .channels import (
    KrausMap,
    LindbladModel,
    completeness_defect,
    guard_mask,
    kraus_from_dilation,
)
from .fock_space import (
    DEFAULT_N_MAX,
    TAIL_LIMIT,
    DensityMatrix,
    FockOperator,
    SqueezeTarget,
    annihilation_op,
    resonant_blocks,
    tail_mass,
    vacuum_state,
)
from .observables import QuadratureStats, _stats_from_array

__all__ = [
    "PairState",
    "PairTuning",
    "TuningReport",
    "ReservoirRun",
    "pair_state_from_tuning",
    "pair_propagator",
    "pair_kraus",
    "pair_lindblad",
    "tune",
    "simulate_pair_reservoir",
]

_NORM_TOL = 1e-12


@dataclass(frozen=True)
class PairState:
    """Joint amplitude vector of one qubit pair on the (gg, ge, eg, ee) basis.

    The first letter labels the qubit that interacts *second*; the second
    letter the one that interacts first.
    """

    beta_gg: complex
    beta_ge: complex
    beta_eg: complex
    beta_ee: complex

    def __post_init__(self) -> None:
        for name in ("beta_gg", "beta_ge", "beta_eg", "beta_ee"):
            object.__setattr__(self, name, complex(getattr(self, name)))
        norm = (
            abs(self.beta_gg) ** 2
            + abs(self.beta_ge) ** 2
            + abs(self.beta_eg) ** 2
            + abs(self.beta_ee) ** 2
        )
        if abs(norm - 1.0) > _NORM_TOL:
            raise ValueError(f"pair amplitudes have norm^2 {norm!r}, expected 1")

    @property
    def amplitudes(self) -> np.ndarray:
        """The vector (beta_gg, beta_ge, beta_eg, beta_ee)."""
        v = np.array(
            [self.beta_gg, self.beta_ge, self.beta_eg, self.beta_ee], dtype=complex
        )
        v.setflags(write=False)
        return v


@dataclass(frozen=True)
class PairTuning:
    """Four-angle parameterization of a normalized pair amplitude vector.

    beta_gg = cos(epsilon) cos(u), beta_ee = e^{i mu} cos(epsilon) sin(u),
    beta_ge = beta_eg = e^{i chi} sin(epsilon)/sqrt(2).  |u| < pi/4 keeps the
    squeezing dissipator contracting; epsilon >= 0 by convention.  theta is
    the half-Rabi angle of each single-qubit interaction.
    """

    u: float
    theta: float
    mu: float = 0.0
    epsilon: float = 0.0
    chi: float = 0.0

    def __post_init__(self) -> None:
        vals = (self.u, self.theta, self.mu, self.epsilon, self.chi)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("tuning angles must be finite")
        if abs(self.u) >= math.pi / 4.0:
            raise ValueError(f"|u| = {abs(self.u)} must be strictly below pi/4")
        if self.epsilon < 0.0:
            raise ValueError(f"epsilon must be non-negative, got {self.epsilon}")
        if self.theta <= 0.0:
            raise ValueError(f"theta must be positive, got {self.theta}")


@dataclass(frozen=True)
class TuningReport:
    """Output of the tuning calculator.

    ``kappa`` is the predicted exponential convergence rate per adimensional
    time; ``tuning`` records the angles that generated ``pair``.
    """

    pair: PairState
    kappa: float
    target: SqueezeTarget
    tuning: PairTuning

    def __post_init__(self) -> None:
        if not (math.isfinite(self.kappa) and self.kappa > 0.0):
            raise ValueError(f"kappa must be positive, got {self.kappa}")


@dataclass(frozen=True)
class ReservoirRun:
    """Trajectory and end state of an iterated reservoir simulation.

    ``converged`` means the windowed fixed-point residual dropped below the
    requested tolerance before ``steps`` ran out; ``tail_ok`` means the final
    tail mass is within the truncation-validity limit.  Neither is an error:
    the caller decides what to do with a flagged run.
    """

    trajectory: tuple[QuadratureStats, ...]
    final_state: DensityMatrix
    steps_taken: int
    converged: bool
    residual: float
    tail_mass: float
    tail_ok: bool


def pair_state_from_tuning(t: PairTuning) -> PairState:
    """Amplitude vector of the four-angle parameterization (normalized exactly)."""
    ce, se = math.cos(t.epsilon), math.sin(t.epsilon)
    cross = cmath.exp(1j * t.chi) * se / math.sqrt(2.0)
    return PairState(
        beta_gg=ce * math.cos(t.u),
        beta_ge=cross,
        beta_eg=cross,
        beta_ee=cmath.exp(1j * t.mu) * ce * math.sin(t.u),
    )


def pair_propagator(theta: float, n_max: int) -> FockOperator:
    """Sequential two-interaction propagator on (second qubit, first qubit, oscillator).

    Qubit ordering matches PairState: the leading tensor slot is the qubit
    that interacts second.
    """
    if n_max < 2:
        raise ValueError(f"n_max must be at least 2, got {n_max}")
    b = resonant_blocks(theta, n_max)
    dim = n_max + 1
    eye2 = np.eye(2, dtype=complex)
    first = np.zeros((2 * dim, 2 * dim), dtype=complex)
    first[:dim, :dim] = b.C.entries
    first[:dim, dim:] = b.R.entries
    first[dim:, :dim] = -b.L.entries
    first[dim:, dim:] = b.C_plus.entries
    u1 = np.kron(eye2, first)
    blocks = {
        (0, 0): b.C.entries,
        (0, 1): b.R.entries,
        (1, 0): -b.L.entries,
        (1, 1): b.C_plus.entries,
    }
    u2 = np.zeros((4 * dim, 4 * dim), dtype=complex)
    for (i, j), blk in blocks.items():
        e_ij = np.zeros((2, 2), dtype=complex)
        e_ij[i, j] = 1.0
        u2 += np.kron(np.kron(e_ij, eye2), blk)
    return FockOperator(4 * dim, u2 @ u1)


def pair_kraus(p: PairState, theta: float, n_max: int = DEFAULT_N_MAX) -> KrausMap:
    """Oscillator channel left by one discarded pair, as outcome-labelled composites.

    Operator order is (M_gg, M_ge, M_eg, M_ee), first letter again the
    second-interacting qubit.  Each operator is a beta-weighted sum of
    products of the resonant blocks; the completeness defect is evaluated on
    the subspace holding three guard levels back from the truncation edge.
    """
    b = resonant_blocks(theta, n_max)
    c, cp = b.C.entries, b.C_plus.entries
    r, l = b.R.entries, b.L.entries
    bgg, bge, beg, bee = p.beta_gg, p.beta_ge, p.beta_eg, p.beta_ee
    m_gg = bgg * (c @ c) + bge * (c @ r) + beg * (r @ c) + bee * (r @ r)
    m_ge = -bgg * (c @ l) + bge * (c @ cp) - beg * (r @ l) + bee * (r @ cp)
    m_eg = -bgg * (l @ c) - bge * (l @ r) + beg * (cp @ c) + bee * (cp @ r)
    m_ee = bgg * (l @ l) - bge * (l @ cp) - beg * (cp @ l) + bee * (cp @ cp)
    dim = n_max + 1
    ops = (m_gg, m_ge, m_eg, m_ee)
    defect = completeness_defect(ops, guard_mask(dim, dim, 3))
    return KrausMap(
        ops=tuple(FockOperator(dim, m) for m in ops),
        completeness_defect=defect,
    )


def pair_lindblad(p: PairState, theta: float, n_max: int = DEFAULT_N_MAX) -> LindbladModel:
    """Small-theta generator of the pair channel.

    The dominant dissipator L1 = sqrt(2) theta (beta_gg a - beta_ee a^dag) is
    a scaled squeezed annihilation operator; the cross-amplitude terms add a
    weak thermal pair (L2, L3) and a displacement-generating Hamiltonian.
    All three dissipators are always present (as zero operators when the
    cross amplitudes vanish) so the model shape does not depend on the input.
    """
    dim = n_max + 1
    a = annihilation_op(n_max).entries
    ad = a.conj().T
    cross = p.beta_ge + p.beta_eg
    q_coeff = p.beta_gg * np.conj(cross) + np.conj(p.beta_ee) * cross
    q = q_coeff * a
    h = -1j * theta * (q - q.conj().T)
    l1 = math.sqrt(2.0) * theta * (p.beta_gg * a - p.beta_ee * ad)
    l2 = theta * cross * a
    l3 = theta * cross * ad
    return LindbladModel(
        H=FockOperator(dim, h),
        dissipators=(
            FockOperator(dim, l1),
            FockOperator(dim, l2),
            FockOperator(dim, l3),
        ),
    )


def tune(target: SqueezeTarget, theta: float) -> TuningReport:
    """Pair tuning stabilizing a displaced squeezed target, with predicted rate.

    The reflection angle chi is taken from a two-argument arctangent of the
    closed-form numerator and denominator, which picks the correct branch
    where a plain tangent inversion is ambiguous.  A target with alpha = 0
    needs no cross amplitude, so chi is set to 0 canonically.
    """
    if theta <= 0.0:
        raise ValueError(f"theta must be positive, got {theta}")
    r, phi_r = target.r, target.phi_r
    th = math.tanh(r)
    u = math.atan(-th)
    mod_a = abs(target.alpha)
    if mod_a == 0.0:
        chi = 0.0
        epsilon = 0.0
    else:
        phi_a = math.atan2(target.alpha.imag, target.alpha.real)
        num = math.sin(phi_a) - th * math.sin(phi_a - phi_r)
        den = math.cos(phi_a) + th * math.cos(phi_a - phi_r)
        chi = math.atan2(num, den)
        s2u = math.sin(2.0 * u)
        factor_sq = (1.0 - s2u) * (1.0 + s2u) / (
            1.0 + math.cos(phi_r - 2.0 * chi) * s2u
        )
        if not 0.0 < factor_sq < 2.0:
            raise RuntimeError(
                f"epsilon square-root factor {factor_sq} escaped (0, 2); "
                "the closed-form inversion is inconsistent"
            )
        epsilon = theta * mod_a / math.sqrt(2.0) * math.sqrt(factor_sq)
    kappa = 2.0 * theta**2 * (1.0 - th * th) / (1.0 + th * th)
    tuning = PairTuning(u=u, theta=theta, mu=phi_r, epsilon=epsilon, chi=chi)
    return TuningReport(
        pair=pair_state_from_tuning(tuning),
        kappa=kappa,
        target=target,
        tuning=tuning,
    )


def _channel_arrays(
    source: PairTuning | PairState | DensityMatrix,
    theta: float | None,
    n_max: int,
) -> list[np.ndarray]:
    if isinstance(source, PairTuning):
        if theta is not None and theta != source.theta:
            raise ValueError("theta is part of the tuning; do not pass it twice")
        return [op.entries for op in pair_kraus(
            pair_state_from_tuning(source), source.theta, n_max
        ).ops]
    if theta is None:
        raise ValueError("theta is required unless the source is a PairTuning")
    if isinstance(source, PairState):
        return [op.entries for op in pair_kraus(source, theta, n_max).ops]
    if isinstance(source, DensityMatrix):
        if source.dim != 4:
            raise ValueError(
                f"a mixed pair source must be 4-dimensional, got dim {source.dim}"
            )
        dim = n_max + 1
        kmap = kraus_from_dilation(
            pair_propagator(theta, n_max),
            source,
            mask=guard_mask(dim, dim, 3),
        )
        return [op.entries for op in kmap.ops]
    raise TypeError(f"unsupported source type {type(source).__name__}")


def simulate_pair_reservoir(
    source: PairTuning | PairState | DensityMatrix,
    theta: float | None = None,
    *,
    n_max: int = DEFAULT_N_MAX,
    steps: int = 20_000,
    decay: float | None = None,
    initial: DensityMatrix | None = None,
    tol: float = 1e-7,
    record_every: int = 1,
) -> ReservoirRun:
    """Iterate the pair channel from the vacuum and record quadrature statistics.

    ``source`` may be a tuning (theta included), a pure pair state, or a 4x4
    density matrix for a degraded (mixed) pair; the latter two need ``theta``.
    ``decay`` adds one photon-loss step of strength gamma*t per pair, applied
    after each pair interaction and renormalized.  Early stopping compares
    snapshots 200 steps apart in entrywise L1 distance against ``tol``;
    ``record_every=0`` records only the final statistics.

    The loop runs on raw arrays, in real arithmetic whenever every operator
    is real, and renormalizes every step so the first-order decay map cannot
    drift the trace.
    """
    if steps < 1:
        raise ValueError(f"steps must be at least 1, got {steps}")
    if record_every < 0:
        raise ValueError(f"record_every must be non-negative, got {record_every}")
    if decay is not None and not 0.0 <= decay < 0.05:
        raise ValueError(f"decay gamma*t per pair must sit in [0, 0.05), got {decay}")

    ops = _channel_arrays(source, theta, n_max)
    if decay:
        from .imperfections import decay_kraus

        ops = ops + [op.entries for op in decay_kraus(decay, n_max).ops]

    dim = n_max + 1
    rho0 = (initial if initial is not None else vacuum_state(n_max)).entries
    if rho0.shape[0] != dim:
        raise ValueError(
            f"initial state dim {rho0.shape[0]} does not match n_max + 1 = {dim}"
        )

    all_real = all(np.max(np.abs(m.imag)) == 0.0 for m in ops) and (
        np.max(np.abs(rho0.imag)) == 0.0
    )
    if all_real:
        pairs = [(m.real.copy(), m.real.T.copy()) for m in ops]
        rho = rho0.real.copy()
    else:
        pairs = [(m.copy(), m.conj().T.copy()) for m in ops]
        rho = rho0.copy()

    window = 200
    trajectory: list[QuadratureStats] = []
    snapshot = rho.copy()
    converged = False
    residual = math.inf
    taken = 0
    for step in range(1, steps + 1):
        out = pairs[0][0] @ rho @ pairs[0][1]
        for m, mt in pairs[1:]:
            out += m @ rho @ mt
        rho = (out + (out.conj().T if not all_real else out.T)) / 2.0
        rho /= rho.trace().real if not all_real else rho.trace()
        taken = step
        if record_every and step % record_every == 0:
            trajectory.append(_stats_from_array(rho))
        if step % window == 0:
            residual = float(np.abs(rho - snapshot).sum())
            if residual < tol:
                converged = True
                break
            snapshot = rho.copy()

    if not trajectory or (record_every and taken % record_every != 0) or not record_every:
        trajectory.append(_stats_from_array(rho))
    final = DensityMatrix(dim, rho.astype(complex))
    tail = tail_mass(final)
    return ReservoirRun(
        trajectory=tuple(trajectory),
        final_state=final,
        steps_taken=taken,
        converged=converged,
        residual=residual,
        tail_mass=tail,
        tail_ok=tail <= TAIL_LIMIT,
    )
