"""Build the truncated rotor chain and look at its smallest truncation.

At l_max = 1/2 every site is a two-level system and the chain collapses to an
antiferromagnetic Heisenberg ring plus a constant. This script checks that
numerically and prints the resulting Pauli form.
"""

import numpy as np

from sigma_gap import (
    HamiltonianSpec,
    build_dense_hamiltonian,
    build_site_basis,
    exact_ground_state,
    heisenberg_form,
    pauli_decompose,
)

for l_max in ("1/2", "3/2", "5/2"):
    basis = build_site_basis(l_max)
    print(f"l_max = {l_max}: site dimension {basis.dim}, states (l, m) =",
          [(str(s.l), str(s.m)) for s in basis.states])

spec = HamiltonianSpec(4, 0.1)
H = build_dense_hamiltonian(spec)
gap = np.max(np.abs(H.toarray() - heisenberg_form(spec).toarray()))
print(f"\nmax |H - Heisenberg form| at N = 4: {gap:.1e}")

ph = pauli_decompose(H, 4)
print(f"{len(ph.terms)} Pauli terms:")
for term in ph.terms[:5]:
    print(f"  {term.coeff.real:+.6f} {term.letters}")
print("  ...")

for n in (4, 6, 8):
    (e0, _), (e1, _) = exact_ground_state(build_dense_hamiltonian(HamiltonianSpec(n, 0.1)), n_states=2)
    print(f"N = {n}: E0 = {e0:.8f}, gap = {e1 - e0:.6f}")
