"""Ground states of the truncated O(3) sigma model chain at theta = pi.

Exact diagonalization, DMRG and statevector VQE on the monopole-harmonic
lattice Hamiltonian, plus entanglement and central-charge analysis.
"""

from .halfint import HALF, HalfInt
from .model import (
    DenseOperator,
    HamiltonianSpec,
    SiteBasis,
    build_dense_hamiltonian,
    build_site_basis,
    exact_ground_state,
    field_operators,
    heisenberg_form,
    kinetic_matrix,
    site_dimension,
    x_operator,
)
from .pauli import PauliHamiltonian, PauliString, pauli_decompose, pauli_to_dense
from .circuit import AnsatzSpec, Circuit, Gate, apply, build_qmps, build_qmps_block, build_s2d, expectation
from .vqe import OptimizerConfig, RunResult, EnsembleResult, ensemble, gradient_variance_scan, optimize
from .tensornet import MPO, MPS, DmrgConfig, build_mpo, dmrg_ground_state, parameter_count
from .observables import (
    CentralChargeFit,
    EntropyPoint,
    energy_density,
    fit_central_charge,
    half_chain_entropy,
    reduced_density_matrix,
    von_neumann_entropy,
)

__version__ = "0.1.0"
