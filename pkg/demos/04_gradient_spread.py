"""Gradient spread of randomly initialized circuits versus chain length.

The standard deviation of each gradient component over random parameter
draws, averaged over components, shrinks as the chain grows.
"""

from sigma_gap import HamiltonianSpec, build_dense_hamiltonian, gradient_variance_scan, pauli_decompose
from sigma_gap.cli import DEFAULT_LAYERS


def hamiltonian(n):
    return pauli_decompose(build_dense_hamiltonian(HamiltonianSpec(n, 0.1)), n)


for kind in ("S2D", "QMPS"):
    stds = gradient_variance_scan(kind, [4, 6, 8, 10], DEFAULT_LAYERS[kind], hamiltonian, n_inits=25, seed=1)
    print(kind, "  ".join(f"N={n}: {s:.3e}" for n, s in stds.items()))
