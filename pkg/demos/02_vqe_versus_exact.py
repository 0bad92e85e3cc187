"""Variational circuits against exact diagonalization at strong coupling.

Both circuit families are trained with Adam from a handful of random starts
and the best run is compared with the exact ground-state energy density.
"""

from sigma_gap import (
    AnsatzSpec,
    HamiltonianSpec,
    OptimizerConfig,
    build_dense_hamiltonian,
    ensemble,
    exact_ground_state,
    pauli_decompose,
)
from sigma_gap.cli import DEFAULT_LAYERS

BETA = 0.1
for n in (4, 6):
    dense = build_dense_hamiltonian(HamiltonianSpec(n, BETA))
    e_exact = exact_ground_state(dense)[0][0]
    H = pauli_decompose(dense, n)
    for kind in ("S2D", "QMPS"):
        circuit = AnsatzSpec(kind, n, DEFAULT_LAYERS[kind][n]).build()
        res = ensemble(circuit, H, OptimizerConfig(seed=n), n_restarts=5)
        rel = (res.best.final_energy - e_exact) / abs(e_exact)
        print(f"N = {n} {kind:4s} ({circuit.n_params:3d} params): best {res.best.final_energy:.8f}, "
              f"exact {e_exact:.8f}, rel dev {rel:.1e}, spread {res.std_energy:.1e}")
