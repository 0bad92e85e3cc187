"""MPS/MPO algebra, the Lanczos solver and two-site DMRG."""

import numpy as np
import pytest

from sigma_gap.lanczos import lanczos_ground
from sigma_gap.model import (
    HamiltonianSpec,
    build_dense_hamiltonian,
    build_site_basis,
    exact_ground_state,
    field_operators,
    kinetic_matrix,
)
from sigma_gap.tensornet import (
    MPO,
    MPS,
    DmrgConfig,
    build_mpo,
    dmrg_ground_state,
    inner,
    mps_expectation,
    mps_to_statevector,
    parameter_count,
    read_mps,
    write_mps,
)

MPS_SIZES = [  # (sites, local dim, max bond, parameters)
    (4, 2, 4, 128),
    (6, 2, 8, 768),
    (8, 2, 16, 4096),
    (10, 2, 32, 20480),
    (4, 6, 36, 31104),
    (6, 6, 207, 1542564),
    (8, 6, 564, 15268608),
    (10, 6, 903, 48924540),
]


def ed(spec, n_states=1):
    return exact_ground_state(build_dense_hamiltonian(spec), n_states)


@pytest.mark.parametrize("n,d,chi,count", MPS_SIZES)
def test_mps_parameter_counts(n, d, chi, count):
    assert parameter_count(n, d, chi) == count


def test_parameter_count_validation():
    with pytest.raises(ValueError):
        parameter_count(0, 2, 4)


# ---------------------------------------------------------------- Lanczos


def test_lanczos_matches_eigh():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((60, 60))
    a = a + a.T
    theta, vec = lanczos_ground(lambda x: a @ x, rng.standard_normal(60), n_iter=30, max_restarts=50)
    assert theta == pytest.approx(np.linalg.eigvalsh(a)[0], abs=1e-10)
    assert np.linalg.norm(a @ vec - theta * vec) < 1e-8


def test_lanczos_invariant_subspace():
    a = np.diag([3.0, 1.0, 2.0])
    theta, vec = lanczos_ground(lambda x: a @ x, np.array([0.0, 1.0, 0.0]))
    assert theta == pytest.approx(1.0)
    assert abs(vec[1]) == pytest.approx(1.0)


def test_lanczos_keeps_tensor_shape():
    a = np.diag(np.arange(8.0))
    theta, vec = lanczos_ground(lambda x: (a @ x.ravel()).reshape(x.shape), np.ones((2, 2, 2)), n_iter=8)
    assert vec.shape == (2, 2, 2)
    assert theta == pytest.approx(0.0, abs=1e-12)


# ---------------------------------------------------------------- MPS


def test_basis_state_to_vector():
    psi = mps_to_statevector(MPS.basis_state([2, 2, 2], [0, 0, 0]))
    np.testing.assert_array_equal(psi, np.eye(8)[0])
    assert MPS.basis_state([2, 3], [1, 2]).bond_dims == [1]


def test_statevector_round_trip():
    rng = np.random.default_rng(1)
    dims = [2, 3, 2, 2]
    vec = rng.standard_normal(24) + 1j * rng.standard_normal(24)
    vec /= np.linalg.norm(vec)
    mps = MPS.from_statevector(vec, dims)
    np.testing.assert_allclose(mps_to_statevector(mps), vec, atol=1e-13)
    assert max(mps.isometry_errors()) < 1e-12


@pytest.mark.parametrize("center", [0, 2, 4])
def test_canonical_form_isometries(center):
    mps = MPS.random([3] * 5, 6, rng=2, dtype=complex)
    vec = mps_to_statevector(mps)
    mps.canonicalize(center)
    assert mps.center == center
    assert max(mps.isometry_errors()) < 1e-12
    np.testing.assert_allclose(mps_to_statevector(mps), vec, atol=1e-12)
    assert mps.norm() == pytest.approx(1.0, abs=1e-12)


def test_schmidt_values_match_dense_svd():
    mps = MPS.random([2] * 6, 8, rng=3)
    vec = mps_to_statevector(mps)
    s = np.linalg.svd(vec.reshape(8, 8), compute_uv=False)
    np.testing.assert_allclose(mps.schmidt_values(2)[: s.size], s / np.linalg.norm(s), atol=1e-12)


def test_identity_expectation():
    mps = MPS.random([2, 6, 2], 4, rng=4)
    assert mps_expectation(mps, MPO.identity([2, 6, 2])) == pytest.approx(1.0, abs=1e-12)


def test_reversal_preserves_state():
    mps = MPS.random([2, 3, 4], 5, rng=5)
    a = mps_to_statevector(mps).reshape(2, 3, 4)
    b = mps_to_statevector(mps.reversed()).reshape(4, 3, 2)
    np.testing.assert_allclose(b, a.transpose(2, 1, 0), atol=1e-13)
    assert inner(mps, mps) == pytest.approx(1.0)


def test_mps_checkpoint_round_trip(tmp_path):
    mps = MPS.random([2, 6, 6, 2], 5, rng=6, dtype=complex)
    write_mps(mps, tmp_path / "m.txt")
    back = read_mps(tmp_path / "m.txt")
    assert back.center == mps.center
    for a, b in zip(mps.tensors, back.tensors):
        np.testing.assert_array_equal(a, b)


# ---------------------------------------------------------------- MPO


@pytest.mark.parametrize("l_max,n,boundary", [("1/2", 4, "periodic"), ("1/2", 5, "open"), ("3/2", 3, "periodic"),
                                              ("3/2", 4, "open"), ("1/2", 2, "periodic")])
def test_mpo_matches_dense(l_max, n, boundary):
    spec = HamiltonianSpec(n, 0.1 if l_max == "1/2" else 2.0, l_max, boundary)
    np.testing.assert_allclose(build_mpo(spec).to_dense(), build_dense_hamiltonian(spec).toarray(), atol=1e-10)


def test_mpo_bond_dimensions():
    assert set(build_mpo(HamiltonianSpec(6, 1.0, boundary="open")).bond_dims) == {5}
    assert set(build_mpo(HamiltonianSpec(6, 1.0, boundary="periodic")).bond_dims) == {8}


def test_two_site_mpo_definition():
    beta = 0.4
    basis = build_site_basis("3/2")
    ops = field_operators(basis)
    l2 = kinetic_matrix(basis).matrix
    eye = np.eye(6)
    ref = (np.kron(l2, eye) + np.kron(eye, l2)) / (2 * beta)
    ref += beta * (np.kron(ops["n_plus"], ops["n_minus"]) + np.kron(ops["n_minus"], ops["n_plus"])
                   + np.kron(ops["n_z"], ops["n_z"]))
    np.testing.assert_allclose(build_mpo(HamiltonianSpec(2, beta, "3/2", "open")).to_dense(), ref, atol=1e-13)


def test_mpo_expectation_matches_dense():
    spec = HamiltonianSpec(4, 0.1)
    mps = MPS.random([2] * 4, 4, rng=7)
    vec = mps_to_statevector(mps)
    dense = build_dense_hamiltonian(spec).toarray()
    assert mps_expectation(mps, build_mpo(spec)) == pytest.approx((vec @ dense @ vec).real, abs=1e-10)


# ---------------------------------------------------------------- DMRG


def test_dmrg_n4_matches_ed():
    spec = HamiltonianSpec(4, 0.1)
    (e0, psi), = ed(spec)
    energy, mps, trunc = dmrg_ground_state(build_mpo(spec), DmrgConfig(cutoff=1e-12))
    assert energy == pytest.approx(e0, abs=1e-9)
    assert mps_expectation(mps, build_mpo(spec)) == pytest.approx(energy, abs=1e-10)
    assert abs(np.vdot(mps_to_statevector(mps), psi)) >= 1 - 1e-8
    assert trunc <= 1e-12


@pytest.mark.parametrize("n", [6, 8, 10])
def test_dmrg_lmax_half_chain(n):
    spec = HamiltonianSpec(n, 0.1)
    e0 = ed(spec)[0][0]
    res = dmrg_ground_state(build_mpo(spec))
    assert res.converged
    assert abs(res.energy - e0) / abs(e0) < 1e-6
    assert res.energy >= e0 - 1e-9


def test_dmrg_n6_lmax_three_halves():
    spec = HamiltonianSpec(6, 10.0, "3/2")
    e0 = ed(spec)[0][0]
    res = dmrg_ground_state(build_mpo(spec), DmrgConfig(cutoff=1e-10))
    assert res.energy == pytest.approx(e0, abs=1e-7)
    assert e0 == pytest.approx(-32.80141122995822, abs=1e-8)


def test_dmrg_product_state_mpo():
    z = np.diag([1.0, -1.0])
    res = dmrg_ground_state(MPO.onsite_sum(z, 6), DmrgConfig(cutoff=1e-12))
    assert res.energy == pytest.approx(-6.0, abs=1e-12)
    assert max(res.mps.bond_dims) == 1


def test_dmrg_sweeps_monotone_and_isometric():
    spec = HamiltonianSpec(8, 1.0)
    errors = []
    res = dmrg_ground_state(
        build_mpo(spec), DmrgConfig(max_bond=8, cutoff=0.0, energy_tol=1e-13, max_sweeps=8),
        callback=lambda sweep, site, mps: errors.append(max(mps.isometry_errors())),
    )
    assert max(errors) < 1e-10
    assert np.all(np.diff(res.sweep_energies) <= 1e-12)


def test_dmrg_reflection_invariance():
    spec = HamiltonianSpec(4, 3.0, "3/2")
    cfg = DmrgConfig(cutoff=1e-10)
    mpo = build_mpo(spec)
    a = dmrg_ground_state(mpo, cfg).energy
    b = dmrg_ground_state(mpo.reversed(), cfg).energy
    assert a == pytest.approx(b, abs=1e-9)


def test_truncation_error_decreases_with_cutoff():
    mpo = build_mpo(HamiltonianSpec(12, 10.0, "1/2"))
    errs = [dmrg_ground_state(mpo, DmrgConfig(cutoff=c)).truncation_error for c in (1e-6, 1e-8, 1e-10, 1e-12)]
    assert all(b <= a for a, b in zip(errs, errs[1:]))
    assert errs[0] > 0


def test_dmrg_is_deterministic():
    mpo = build_mpo(HamiltonianSpec(6, 0.5))
    a = dmrg_ground_state(mpo, DmrgConfig(seed=3))
    b = dmrg_ground_state(mpo, DmrgConfig(seed=3))
    assert a.sweep_energies == b.sweep_energies


def test_dmrg_config_validation():
    with pytest.raises(ValueError):
        DmrgConfig(cutoff=-1)
    with pytest.raises(ValueError):
        DmrgConfig(max_bond=0)
