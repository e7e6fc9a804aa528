"""Tests for channel machinery: propagator, dilations, Lindblad, fixed points."""

import math

import numpy as np
import pytest
from helpers import confined_random_density, random_density

from qubitbath.channels import (
    FixedPointResult,
    KrausMap,
    LindbladModel,
    apply_channel,
    completeness_defect,
    fixed_point,
    guard_mask,
    integrate_lindblad,
    kraus_from_dilation,
    resonant_propagator,
    trace_norm,
    _trace_norm_below,
)
from qubitbath.fock_space import (
    DensityMatrix,
    FockOperator,
    annihilation_op,
    resonant_blocks,
    vacuum_state,
)


def qubit_osc_state(qubit_vec, osc_dm_entries):
    q = np.outer(qubit_vec, np.conj(qubit_vec))
    rho = np.kron(q, osc_dm_entries)
    return DensityMatrix(rho.shape[0], rho)


def test_propagator_identity_at_zero_angle():
    u = resonant_propagator(0.0, 6).entries
    np.testing.assert_allclose(u, np.eye(14), atol=1e-12)


def test_propagator_ground_vacuum_dark_state():
    n_max = 10
    u = resonant_propagator(0.7, n_max).entries
    vec = np.zeros(2 * (n_max + 1), dtype=complex)
    vec[0] = 1.0  # |g⟩⊗|0⟩
    out = u @ vec
    np.testing.assert_allclose(out, vec, atol=1e-14)


def test_propagator_full_excitation_swap():
    # |e⟩⊗|0⟩ at θ=π/2 transfers entirely to |g⟩⊗|1⟩: sin(π/2·√1) = 1.
    n_max = 10
    dim = n_max + 1
    u = resonant_propagator(math.pi / 2, n_max).entries
    vec = np.zeros(2 * dim, dtype=complex)
    vec[dim] = 1.0
    out = u @ vec
    assert abs(out[1] - 1.0) < 1e-12


def test_propagator_unitary_on_guarded_subspace():
    n_max = 30
    u = resonant_propagator(0.41, n_max).entries
    mask = guard_mask(2 * (n_max + 1), n_max + 1, 2)
    for prod in (u.conj().T @ u, u @ u.conj().T):
        e = (prod - np.eye(2 * (n_max + 1)))[np.ix_(mask, mask)]
        assert np.max(np.abs(e)) < 1e-10


def test_guard_mask_shape():
    m = guard_mask(8, 4, 1)
    np.testing.assert_array_equal(m, [True, True, True, False, True, True, True, False])
    with pytest.raises(ValueError):
        guard_mask(9, 4, 1)


def test_dilation_identity_unitary():
    anc = DensityMatrix(2, np.diag([1.0, 0.0]))
    kmap = kraus_from_dilation(np.eye(6), anc)
    assert len(kmap.ops) == 2
    np.testing.assert_allclose(kmap.ops[0].entries, np.eye(3), atol=1e-14)
    np.testing.assert_allclose(kmap.ops[1].entries, np.zeros((3, 3)), atol=1e-14)
    assert kmap.completeness_defect < 1e-12


def test_dilation_reads_off_propagator_columns():
    n_max = 12
    theta = 0.37
    anc = DensityMatrix(2, np.diag([1.0, 0.0]))  # |g⟩⟨g|
    kmap = kraus_from_dilation(resonant_propagator(theta, n_max), anc)
    b = resonant_blocks(theta, n_max)
    np.testing.assert_allclose(kmap.ops[0].entries, b.C.entries, atol=1e-14)
    np.testing.assert_allclose(kmap.ops[1].entries, -b.L.entries, atol=1e-14)


def test_dilation_completeness_for_exact_unitary():
    rng = np.random.default_rng(7)
    z = rng.standard_normal((12, 12)) + 1j * rng.standard_normal((12, 12))
    q, _ = np.linalg.qr(z)
    anc_vec = np.array([0.6, 0.8j], dtype=complex)
    anc = DensityMatrix(2, np.outer(anc_vec, anc_vec.conj()))
    kmap = kraus_from_dilation(q, anc)
    assert kmap.completeness_defect < 1e-10


def test_dilation_mixed_ancilla_equals_mixture_of_channels():
    rng = np.random.default_rng(21)
    n_max = 7
    u = resonant_propagator(0.9, n_max)
    p = 0.7
    anc_mixed = DensityMatrix(2, np.diag([p, 1.0 - p]))
    anc_g = DensityMatrix(2, np.diag([1.0, 0.0]))
    anc_e = DensityMatrix(2, np.diag([0.0, 1.0]))
    rho = confined_random_density(rng, n_max + 1, hot=4)
    out_mixed = apply_channel(kraus_from_dilation(u, anc_mixed), rho)
    out_g = apply_channel(kraus_from_dilation(u, anc_g), rho)
    out_e = apply_channel(kraus_from_dilation(u, anc_e), rho)
    blend = p * out_g.entries + (1.0 - p) * out_e.entries
    assert np.max(np.abs(out_mixed.entries - blend)) < 1e-12


def test_dilation_rejects_bad_inputs():
    anc = DensityMatrix(2, np.diag([1.0, 0.0]))
    with pytest.raises(ValueError, match="divisible"):
        kraus_from_dilation(np.eye(5), anc)
    skewed = np.array([[1.0, 0.1], [0.0, 1.0]])
    with pytest.raises(ValueError, match="orthonormal"):
        kraus_from_dilation(np.eye(6), anc, ancilla_basis=skewed)


def test_apply_channel_identity():
    rng = np.random.default_rng(3)
    rho = random_density(rng, 9)
    kmap = KrausMap(ops=(FockOperator(9, np.eye(9)),), completeness_defect=0.0)
    out = apply_channel(kmap, rho)
    np.testing.assert_allclose(out.entries, rho.entries, atol=1e-14)


def test_apply_channel_vacuum_dark_state():
    n_max = 15
    anc = DensityMatrix(2, np.diag([1.0, 0.0]))
    kmap = kraus_from_dilation(resonant_propagator(0.2, n_max), anc)
    out = apply_channel(kmap, vacuum_state(n_max))
    np.testing.assert_allclose(out.entries, vacuum_state(n_max).entries, atol=1e-14)


def test_apply_channel_positivity_preserved():
    rng = np.random.default_rng(11)
    n_max = 15
    anc = DensityMatrix(2, np.diag([0.5, 0.5]))
    kmap = kraus_from_dilation(resonant_propagator(0.3, n_max), anc)
    rho = confined_random_density(rng, n_max + 1, hot=4)
    for _ in range(30):
        rho = apply_channel(kmap, rho, renormalize=True)
    assert float(np.linalg.eigvalsh(rho.entries)[0]) > -1e-8


def test_apply_channel_renormalize_flag():
    dim = 4
    shrunk = KrausMap(
        ops=(FockOperator(dim, 0.999 * np.eye(dim)),),
        completeness_defect=abs(0.999**2 - 1.0),
    )
    rho = DensityMatrix(dim, np.eye(dim) / dim)
    out = apply_channel(shrunk, rho, renormalize=True)
    assert abs(out.entries.trace().real - 1.0) < 1e-14


def test_lindblad_photon_decay():
    # Single dissipator √κ a: ⟨N⟩(τ) = e^{−κτ} starting from |1⟩⟨1|.
    n_max = 5
    kappa = 0.5
    a = annihilation_op(n_max)
    model = LindbladModel(
        H=FockOperator(n_max + 1, np.zeros((n_max + 1, n_max + 1))),
        dissipators=(FockOperator(n_max + 1, math.sqrt(kappa) * a.entries),),
    )
    rho0 = np.zeros((n_max + 1, n_max + 1), dtype=complex)
    rho0[1, 1] = 1.0
    out = integrate_lindblad(model, DensityMatrix(n_max + 1, rho0), duration=2.0)
    n_mean = float(np.trace(np.diag(np.arange(n_max + 1.0)) @ out.entries).real)
    assert abs(n_mean - math.exp(-kappa * 2.0)) < 1e-5


def test_lindblad_zero_generator_is_identity():
    rng = np.random.default_rng(5)
    rho = random_density(rng, 6)
    model = LindbladModel(
        H=FockOperator(6, np.zeros((6, 6))),
        dissipators=(),
    )
    out = integrate_lindblad(model, rho, duration=1.0, dt=0.1)
    np.testing.assert_allclose(out.entries, rho.entries, atol=1e-12)


def test_lindblad_detects_blowup():
    n_max = 20
    a = annihilation_op(n_max)
    model = LindbladModel(
        H=FockOperator(n_max + 1, np.zeros((n_max + 1, n_max + 1))),
        dissipators=(FockOperator(n_max + 1, 10.0 * a.entries),),
    )
    rng = np.random.default_rng(9)
    with pytest.raises(RuntimeError, match="blew up"):
        integrate_lindblad(model, random_density(rng, n_max + 1), duration=50.0, dt=1.0)


def test_lindblad_rejects_bad_steps():
    model = LindbladModel(H=FockOperator(3, np.zeros((3, 3))), dissipators=())
    rho = DensityMatrix(3, np.eye(3) / 3)
    with pytest.raises(ValueError):
        integrate_lindblad(model, rho, duration=1.0, dt=-0.1)
    with pytest.raises(ValueError):
        integrate_lindblad(model, rho, duration=0.05, dt=0.1)


def test_fixed_point_identity_step():
    rng = np.random.default_rng(13)
    rho = random_density(rng, 5)
    res = fixed_point(lambda r: r, rho, tol=1e-10)
    assert isinstance(res, FixedPointResult)
    assert res.converged and res.iterations == 1
    np.testing.assert_allclose(res.state.entries, rho.entries, atol=1e-14)


def test_fixed_point_amplitude_damping_reaches_vacuum():
    p = 0.3
    m0 = np.array([[1.0, 0.0], [0.0, math.sqrt(1.0 - p)]], dtype=complex)
    m1 = np.array([[0.0, math.sqrt(p)], [0.0, 0.0]], dtype=complex)
    kmap = KrausMap(
        ops=(FockOperator(2, m0), FockOperator(2, m1)),
        completeness_defect=completeness_defect([m0, m1]),
    )
    rho = DensityMatrix(2, np.array([[0.2, 0.1], [0.1, 0.8]], dtype=complex))
    res = fixed_point(lambda r: apply_channel(kmap, r), rho, tol=1e-12)
    assert res.converged
    np.testing.assert_allclose(res.state.entries, np.diag([1.0, 0.0]), atol=1e-10)


def test_fixed_point_flags_non_convergence():
    # A rigid rotation never settles: flag, don't raise.
    phase = np.diag([1.0, np.exp(0.5j)])
    kmap = KrausMap(ops=(FockOperator(2, phase),), completeness_defect=0.0)
    rho = DensityMatrix(2, np.array([[0.5, 0.5], [0.5, 0.5]], dtype=complex))
    res = fixed_point(lambda r: apply_channel(kmap, r), rho, tol=1e-10, max_iters=50)
    assert not res.converged
    assert res.iterations == 50


def test_trace_norm_decision_matches_exact_value():
    rng = np.random.default_rng(17)
    for _ in range(40):
        d = rng.integers(2, 9)
        delta = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        delta *= 10.0 ** rng.integers(-9, 1)
        tol = 10.0 ** rng.integers(-8, 0)
        decision, _ = _trace_norm_below(delta, tol)
        assert decision == (trace_norm(delta) < tol)


def test_lindblad_model_validates_hamiltonian():
    with pytest.raises(ValueError, match="Hermitian"):
        LindbladModel(
            H=FockOperator(2, np.array([[0.0, 1.0], [0.0, 0.0]])),
            dissipators=(),
        )
