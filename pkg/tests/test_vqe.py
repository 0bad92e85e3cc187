"""Adam, the training loop, ensembles and gradient-spread scans."""

import dataclasses
import math

import numpy as np
import pytest

from sigma_gap.circuit import Circuit, Energy, Gate, apply, build_qmps, build_s2d, expectation
from sigma_gap.model import HamiltonianSpec, build_dense_hamiltonian, exact_ground_state
from sigma_gap.pauli import PauliHamiltonian, PauliString, pauli_decompose
from sigma_gap.vqe import (
    AdamState,
    OptimizerConfig,
    adam_step,
    derive_seed,
    ensemble,
    gradient_variance_scan,
    make_rng,
    optimize,
)


def sigma_pauli(n, beta=0.1):
    return pauli_decompose(build_dense_hamiltonian(HamiltonianSpec(n, beta)), n)


def test_adam_zero_gradient():
    state = AdamState.zeros(3)
    state.m[:] = 1.0
    state.v[:] = 1.0
    p, new = adam_step(np.ones(3), np.zeros(3), state, 0.1)
    assert new.t == 1
    np.testing.assert_allclose(new.m, 0.9)
    np.testing.assert_allclose(new.v, 0.999)
    # from a fresh state a zero gradient leaves the parameters alone
    p0, _ = adam_step(np.ones(3), np.zeros(3), AdamState.zeros(3), 0.1)
    np.testing.assert_array_equal(p0, np.ones(3))


def test_adam_constant_gradient_step():
    g = np.array([2.0, -0.5, 1e-3])
    p, state = np.zeros(3), AdamState.zeros(3)
    for _ in range(200):
        new, state = adam_step(p, g, state, 0.01)
        step, p = new - p, new
    np.testing.assert_allclose(step, -0.01 * np.sign(g), rtol=1e-3)


def test_adam_quadratic_bowl():
    target = np.array([1.5, -0.7])
    scale = np.array([1.0, 3.0])
    p, state = np.zeros(2), AdamState.zeros(2)
    lr = 0.1
    for t in range(500):
        if t and t % 100 == 0:
            lr *= 0.5
        p, state = adam_step(p, 2 * scale * (p - target), state, lr)
    np.testing.assert_allclose(p, target, atol=1e-4)


def test_adam_shape_check():
    with pytest.raises(ValueError):
        adam_step(np.zeros(2), np.zeros(3), AdamState.zeros(2), 0.1)


def test_config_validation():
    with pytest.raises(ValueError):
        OptimizerConfig(lr_init=0)
    with pytest.raises(ValueError):
        OptimizerConfig(gradient="spsa")
    with pytest.raises(ValueError):
        OptimizerConfig(adam_beta1=1.0)


def test_rng_is_pcg64_and_reproducible():
    a, b = make_rng(42), make_rng(42)
    assert isinstance(a.bit_generator, np.random.PCG64)
    np.testing.assert_array_equal(a.random(5), b.random(5))
    assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3)
    assert derive_seed(1, 2, 3) != derive_seed(1, 3, 2)
    assert 0 <= derive_seed(2**64 - 1, 7) < 2**63


def test_qmps_reaches_zz_ground_state():
    # RY(0) x RY(pi) then CNOT maps |00> to |01>, an eigenstate of ZZ with -1
    c = build_qmps(2, 1)
    zz = PauliHamiltonian(2, [PauliString(1.0, "ZZ")])
    assert expectation(apply(c, [0.0, math.pi]), zz) == pytest.approx(-1.0, abs=1e-14)
    res = optimize(c, zz, OptimizerConfig(seed=3))
    assert res.final_energy == pytest.approx(-1.0, abs=1e-5)


def test_sigma_n4_s2d():
    H = sigma_pauli(4)
    e0 = exact_ground_state(build_dense_hamiltonian(HamiltonianSpec(4, 0.1)))[0][0]
    res = optimize(build_s2d(4, 5), H, OptimizerConfig(seed=1))
    assert not res.failed
    assert abs(res.final_energy - e0) / abs(e0) < 1e-3
    assert res.final_energy >= e0 - 1e-9


def test_max_epochs_zero_returns_initial_energy():
    c = build_s2d(3, 1)
    H = sigma_pauli(3)
    res = optimize(c, H, OptimizerConfig(max_epochs=0, seed=9))
    params = make_rng(9).uniform(0.0, 2 * math.pi, c.n_params)
    assert res.epochs_run == 0
    assert res.final_energy == pytest.approx(Energy(c, H)(params), abs=1e-14)
    np.testing.assert_array_equal(res.best_params, params)


def test_trajectory_and_schedule_invariants():
    c = build_s2d(4, 2)
    cfg = OptimizerConfig(seed=4, max_epochs=900, stop_patience=10_000, halving_period=200)
    res = optimize(c, sigma_pauli(4, 1.0), cfg)
    best = res.best_so_far
    assert np.all(np.diff(best) <= 0)
    lrs = np.array(res.lr_trajectory)
    halvings = -np.log2(lrs / cfg.lr_init)
    np.testing.assert_allclose(halvings, np.round(halvings), atol=1e-12)
    assert np.all(np.diff(halvings) >= 0)
    changes = np.flatnonzero(np.diff(halvings)) + 1
    assert np.all(changes % cfg.halving_period == 0)


def test_stop_rule():
    c = Circuit(1, [Gate("RY", (0,), 0)], 1)
    z = PauliHamiltonian(1, [PauliString(1.0, "Z")])
    res = optimize(c, z, OptimizerConfig(seed=0, stop_patience=30))
    assert res.epochs_run < 2000
    traj = np.array(res.energy_trajectory)
    tail = np.minimum.accumulate(traj)[-31:]
    assert tail[0] - tail[-1] <= 1e-6


def test_parameter_shift_mode_matches_adjoint():
    c = build_s2d(4, 1)
    H = sigma_pauli(4)
    a = optimize(c, H, OptimizerConfig(seed=2, max_epochs=30))
    b = optimize(c, H, OptimizerConfig(seed=2, max_epochs=30, gradient="parameter-shift"))
    np.testing.assert_allclose(a.energy_trajectory, b.energy_trajectory, rtol=1e-10)


def test_ensemble_convex_problem():
    c = Circuit(1, [Gate("RY", (0,), 0)], 1)
    z = PauliHamiltonian(1, [PauliString(1.0, "Z")])
    res = ensemble(c, z, OptimizerConfig(seed=0, stop_tol=1e-12, stop_patience=200), n_restarts=2)
    assert res.std_energy <= 1e-6
    assert res.best.final_energy == pytest.approx(-1.0, abs=1e-6)


def test_ensemble_deterministic_and_order_invariant():
    c = build_s2d(4, 1)
    H = sigma_pauli(4)
    cfg = OptimizerConfig(seed=17, max_epochs=40)
    a = ensemble(c, H, cfg, n_restarts=4)
    b = ensemble(c, H, cfg, n_restarts=4)
    assert [r.energy_trajectory for r in a.runs] == [r.energy_trajectory for r in b.runs]
    assert a.mean_energy == b.mean_energy and a.std_energy == b.std_energy
    finals = np.array([r.final_energy for r in a.runs])
    assert np.std(finals[::-1]) == pytest.approx(a.std_energy, abs=1e-15)
    assert len({r.seed for r in a.runs}) == 4


def test_ensemble_rejects_single_run():
    with pytest.raises(ValueError):
        ensemble(build_s2d(2, 1), sigma_pauli(2), OptimizerConfig(), n_restarts=1)


def test_gradient_scan_trend_and_determinism():
    layers = {4: 5, 8: 39}
    kw = dict(n_inits=10, seed=5)
    a = gradient_variance_scan("S2D", [4, 8], layers, sigma_pauli, **kw)
    b = gradient_variance_scan("S2D", [4, 8], layers, sigma_pauli, **kw)
    assert a == b
    assert a[8] < a[4]


def test_gradient_scan_needs_two_inits():
    with pytest.raises(ValueError):
        gradient_variance_scan("S2D", [4], {4: 5}, sigma_pauli, n_inits=1)


def test_run_result_serializes():
    res = optimize(build_s2d(2, 1), sigma_pauli(2), OptimizerConfig(max_epochs=3))
    doc = res.to_dict()
    assert isinstance(doc["best_params"], list)
    assert doc["epochs_run"] == 3
    assert dataclasses.is_dataclass(res)
