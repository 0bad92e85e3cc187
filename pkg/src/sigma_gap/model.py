"""Truncated O(3) sigma model at theta = pi as a chain of monopole rotors.

Each lattice site carries the monopole-harmonic states ``|q l m>`` with
monopole charge ``q = 1/2`` and ``l = 1/2, 3/2, ..., l_max``. The chain
Hamiltonian is

    H = 1/(2 beta) sum_k L_k^2 + beta sum_<k,k'> (n+_k n-_k' + n-_k n+_k' + nz_k nz_k')

with ``n+ = -X_{+1}``, ``n- = X_{-1}`` and ``nz = X_0``, where the rank-1
tensor operators ``X_M`` have matrix elements proportional to products of
two Wigner 3j symbols. Lattice spacing and hbar are set to one.
"""

from __future__ import annotations

import math
from fractions import Fraction
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .halfint import HALF, HalfInt
from .wigner import wigner3j

MONOPOLE_CHARGE = HALF

#: largest Hilbert-space dimension handled with a dense matrix
DENSE_LIMIT = 4096
#: refuse to assemble chains larger than this
MAX_CHAIN_DIM = 2_000_000

HERMITIAN_TOL = 1e-12


class BasisState(NamedTuple):
    q: HalfInt
    l: HalfInt  # noqa: E741
    m: HalfInt


@dataclass(frozen=True)
class SiteBasis:
    """Ordered single-site basis, ``l`` ascending and ``m`` descending."""

    l_max: HalfInt
    states: tuple[BasisState, ...]

    def __len__(self) -> int:
        return len(self.states)

    @property
    def dim(self) -> int:
        return len(self.states)

    def index(self, l, m) -> int:
        return self.states.index(BasisState(MONOPOLE_CHARGE, HalfInt(l), HalfInt(m)))

    def multiplets(self) -> list[tuple[HalfInt, slice]]:
        """``(l, slice)`` pairs locating each ``l`` block in the ordering."""
        out = []
        start = 0
        for state_idx, state in enumerate(self.states):
            if state_idx + 1 == len(self.states) or self.states[state_idx + 1].l != state.l:
                out.append((state.l, slice(start, state_idx + 1)))
                start = state_idx + 1
        return out


@dataclass
class DenseOperator:
    """A square operator plus a Hermiticity flag.

    ``matrix`` is a numpy array, or a scipy sparse matrix for chain
    Hamiltonians above :data:`DENSE_LIMIT`.
    """

    matrix: np.ndarray | sp.spmatrix
    hermitian: bool = False

    def __post_init__(self):
        shape = self.matrix.shape
        if len(shape) != 2 or shape[0] != shape[1]:
            raise ValueError(f"operator must be square, got shape {shape}")
        if self.hermitian:
            dev = hermiticity_error(self.matrix)
            if dev > HERMITIAN_TOL * max(1.0, _max_abs(self.matrix)):
                raise ValueError(f"operator flagged Hermitian but |A - A^H| = {dev:.3e}")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.matrix)

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray() if self.is_sparse else np.asarray(self.matrix)


@dataclass(frozen=True)
class HamiltonianSpec:
    n_sites: int
    beta: float
    l_max: HalfInt = field(default_factory=lambda: HALF)
    boundary: str = "periodic"

    def __post_init__(self):
        object.__setattr__(self, "l_max", HalfInt(self.l_max))
        if int(self.n_sites) != self.n_sites or self.n_sites < 2:
            raise ValueError(f"n_sites must be an integer >= 2, got {self.n_sites}")
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise ValueError(f"beta must be positive and finite, got {self.beta}")
        if self.boundary not in ("open", "periodic"):
            raise ValueError(f"boundary must be 'open' or 'periodic', got {self.boundary!r}")
        _check_l_max(self.l_max)

    def bonds(self) -> list[tuple[int, int]]:
        """Zero-based nearest-neighbour pairs; the ring bond only for N > 2."""
        pairs = [(k, k + 1) for k in range(self.n_sites - 1)]
        if self.boundary == "periodic" and self.n_sites > 2:
            pairs.append((self.n_sites - 1, 0))
        return pairs


def hermiticity_error(matrix) -> float:
    diff = matrix - matrix.conj().T
    if sp.issparse(diff):
        return float(abs(diff).max()) if diff.nnz else 0.0
    return float(np.max(np.abs(diff))) if diff.size else 0.0


def _max_abs(matrix) -> float:
    if sp.issparse(matrix):
        return float(abs(matrix).max()) if matrix.nnz else 0.0
    return float(np.max(np.abs(matrix))) if matrix.size else 0.0


def _check_l_max(l_max: HalfInt) -> None:
    if l_max.twice < 1 or l_max.is_integer:
        raise ValueError(f"l_max must be a positive half-odd integer (1/2, 3/2, ...), got {l_max}")


def site_dimension(l_max) -> int:
    """Number of single-site states, ``l_max (l_max + 2) + 3/4``."""
    l_max = HalfInt(l_max)
    _check_l_max(l_max)
    x = l_max.as_fraction()
    return int(x * (x + 2) + Fraction(3, 4))


def build_site_basis(l_max) -> SiteBasis:
    l_max = HalfInt(l_max)
    _check_l_max(l_max)
    states = []
    for twice_l in range(MONOPOLE_CHARGE.twice, l_max.twice + 1, 2):
        for twice_m in range(twice_l, -twice_l - 1, -2):
            states.append(
                BasisState(MONOPOLE_CHARGE, HalfInt.from_twice(twice_l), HalfInt.from_twice(twice_m))
            )
    return SiteBasis(l_max, tuple(states))


def kinetic_matrix(basis: SiteBasis) -> DenseOperator:
    """Diagonal ``L^2`` with eigenvalue ``l (l + 1)``."""
    diag = [float(s.l) * (float(s.l) + 1.0) for s in basis.states]
    return DenseOperator(np.diag(np.asarray(diag, dtype=float)), hermitian=True)


def ladder_matrices(basis: SiteBasis) -> tuple[DenseOperator, DenseOperator, DenseOperator]:
    """``(L+, L-, Lz)`` acting within each ``l`` multiplet of the truncated basis."""
    dim = basis.dim
    lplus = np.zeros((dim, dim))
    lminus = np.zeros((dim, dim))
    lz = np.zeros((dim, dim))
    for col, s in enumerate(basis.states):
        l, m = float(s.l), float(s.m)
        lz[col, col] = m
        if s.m < s.l:
            lplus[basis.index(s.l, s.m + 1), col] = math.sqrt((l - m) * (l + m + 1))
        if s.m > -s.l:
            lminus[basis.index(s.l, s.m - 1), col] = math.sqrt((l + m) * (l - m + 1))
    return (
        DenseOperator(lplus),
        DenseOperator(lminus),
        DenseOperator(lz, hermitian=True),
    )


def x_operator(basis: SiteBasis, M: int) -> DenseOperator:
    """Spherical component ``X_M`` of the unit-vector field, ``M`` in {-1, 0, 1}.

    ``<q l' m'| X_M |q l m> = (-1)^(q + m' + l + l' + 1) sqrt((2l'+1)(2l+1))
    (l' 1 l; -q 0 q) (l' 1 l; -m' M m)``, restricted to ``l, l' <= l_max``.
    """
    if M not in (-1, 0, 1):
        raise ValueError(f"M must be -1, 0 or 1, got {M}")
    q = MONOPOLE_CHARGE
    dim = basis.dim
    out = np.zeros((dim, dim))
    for row, bra in enumerate(basis.states):
        for col, ket in enumerate(basis.states):
            if bra.m != ket.m + M:
                continue
            reduced = wigner3j(bra.l, 1, ket.l, -q, 0, q)
            if reduced == 0.0:
                continue
            angular = wigner3j(bra.l, 1, ket.l, -bra.m, M, ket.m)
            if angular == 0.0:
                continue
            phase = int(q + bra.m + ket.l + bra.l + 1)
            sign = -1.0 if phase % 2 else 1.0
            degeneracy = math.sqrt((2 * float(bra.l) + 1) * (2 * float(ket.l) + 1))
            out[row, col] = sign * degeneracy * reduced * angular
    return DenseOperator(out, hermitian=(M == 0))


def field_operators(basis: SiteBasis) -> dict[str, np.ndarray]:
    """Single-site ``n+``, ``n-`` and ``nz`` as arrays."""
    return {
        "n_plus": -x_operator(basis, +1).matrix,
        "n_minus": x_operator(basis, -1).matrix,
        "n_z": x_operator(basis, 0).matrix,
    }


def chain_dimension(spec: HamiltonianSpec) -> int:
    return site_dimension(spec.l_max) ** spec.n_sites


def _embed(ops: dict[int, np.ndarray], n_sites: int, d: int, sparse: bool):
    """Kronecker product with ``ops[k]`` on site ``k`` and identities elsewhere."""
    if sparse:
        eye = sp.identity(d, format="csr")
        out = sp.identity(1, format="csr")
        for k in range(n_sites):
            out = sp.kron(out, sp.csr_matrix(ops[k]) if k in ops else eye, format="csr")
        return out
    out = np.ones((1, 1))
    for k in range(n_sites):
        out = np.kron(out, ops.get(k, np.eye(d)))
    return out


def build_dense_hamiltonian(
    spec: HamiltonianSpec,
    *,
    site_ops: dict[str, np.ndarray] | None = None,
    basis: SiteBasis | None = None,
) -> DenseOperator:
    """Assemble the chain Hamiltonian, dense up to :data:`DENSE_LIMIT` and sparse above.

    ``site_ops`` may override the single-site ``L2``, ``n_plus``, ``n_minus``
    and ``n_z`` matrices (used for convention and invariance checks).
    """
    if basis is None:
        basis = build_site_basis(spec.l_max)
    d = basis.dim
    total = d ** spec.n_sites
    if total > MAX_CHAIN_DIM:
        raise ValueError(f"chain dimension {total} exceeds the limit {MAX_CHAIN_DIM}")
    ops = dict(field_operators(basis))
    ops["L2"] = kinetic_matrix(basis).matrix
    if site_ops:
        ops.update(site_ops)
    sparse = total > DENSE_LIMIT

    n = spec.n_sites
    h = sp.csr_matrix((total, total)) if sparse else np.zeros((total, total))
    kin = ops["L2"] / (2.0 * spec.beta)
    for k in range(n):
        h = h + _embed({k: kin}, n, d, sparse)
    for a, b in spec.bonds():
        for left, right in (("n_plus", "n_minus"), ("n_minus", "n_plus"), ("n_z", "n_z")):
            h = h + spec.beta * _embed({a: ops[left], b: ops[right]}, n, d, sparse)
    if sparse:
        h = h.tocsr()
        h.sum_duplicates()
        h.eliminate_zeros()
    return DenseOperator(h, hermitian=True)


def heisenberg_form(spec: HamiltonianSpec) -> DenseOperator:
    """Closed form at ``l_max = 1/2``: ``3N/(8 beta) I + beta/9 sum sigma.sigma``."""
    if spec.l_max != HALF:
        raise ValueError("the Heisenberg reduction only holds at l_max = 1/2")
    n = spec.n_sites
    if 2**n > DENSE_LIMIT:
        raise ValueError("heisenberg_form is dense-only")
    paulis = [
        np.array([[0, 1], [1, 0]], dtype=complex),
        np.array([[0, -1j], [1j, 0]]),
        np.array([[1, 0], [0, -1]], dtype=complex),
    ]
    h = (3 * n / (8 * spec.beta)) * np.eye(2**n, dtype=complex)
    for a, b in spec.bonds():
        for s in paulis:
            h += (spec.beta / 9) * _embed({a: s, b: s}, n, 2, sparse=False)
    return DenseOperator(h, hermitian=True)


def exact_ground_state(op: DenseOperator, n_states: int = 1) -> list[tuple[float, np.ndarray]]:
    """Lowest ``n_states`` eigenpairs of a Hermitian operator, energies ascending."""
    if not op.hermitian:
        raise ValueError("exact_ground_state requires a Hermitian operator")
    dim = op.dim
    if not 1 <= n_states <= dim:
        raise ValueError(f"n_states must lie in [1, {dim}]")
    if dim <= DENSE_LIMIT or n_states >= dim - 1:
        vals, vecs = scipy.linalg.eigh(op.toarray(), subset_by_index=(0, n_states - 1))
    else:
        mat = op.matrix if op.is_sparse else sp.csr_matrix(op.matrix)
        rng = np.random.default_rng(0)
        v0 = rng.standard_normal(dim)
        try:
            vals, vecs = spla.eigsh(mat, k=n_states, which="SA", v0=v0, tol=1e-13, maxiter=20 * dim)
        except spla.ArpackNoConvergence as exc:
            raise RuntimeError("iterative eigensolver did not converge") from exc
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
    norm = scipy.sparse.linalg.norm(op.matrix, 1) if op.is_sparse else np.linalg.norm(op.matrix, 1)
    out = []
    for i in range(n_states):
        v = vecs[:, i] / np.linalg.norm(vecs[:, i])
        residual = np.linalg.norm(op.matrix @ v - vals[i] * v)
        if residual > 1e-9 * max(norm, 1.0):
            raise RuntimeError(f"eigenpair {i} residual {residual:.2e} exceeds tolerance")
        out.append((float(vals[i]), v))
    return out


def write_triplets(op: DenseOperator, path) -> None:
    """Write nonzero entries as ``row col re im`` lines, 17 significant digits."""
    coo = sp.coo_matrix(op.matrix)
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w") as fh:
        fh.write(f"# dim {op.dim} hermitian {int(op.hermitian)}\n")
        for i in order:
            z = complex(coo.data[i])
            fh.write(f"{coo.row[i]} {coo.col[i]} {z.real:.17g} {z.imag:.17g}\n")


def read_triplets(path) -> DenseOperator:
    rows, cols, vals = [], [], []
    dim, hermitian = None, False
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                parts = line[1:].split()
                dim, hermitian = int(parts[1]), bool(int(parts[3]))
                continue
            r, c, re, im = line.split()
            rows.append(int(r))
            cols.append(int(c))
            vals.append(complex(float(re), float(im)))
    if dim is None:
        raise ValueError(f"{path}: missing '# dim' header")
    data = np.asarray(vals, dtype=complex)
    if not np.any(data.imag):
        data = data.real
    mat = sp.coo_matrix((data, (rows, cols)), shape=(dim, dim)).tocsr()
    matrix = mat if dim > DENSE_LIMIT else mat.toarray()
    return DenseOperator(matrix, hermitian=hermitian)
