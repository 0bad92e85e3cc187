"""Pauli-string representation of qubit Hamiltonians.

A string on ``n`` qubits is stored as letters over ``IXYZ``; qubit 0 is the
leftmost letter and the leftmost Kronecker factor (most significant bit of a
basis-state index). Internally each string is an ``(x, z)`` bit-mask pair
with ``P = i^{#Y} X^x Z^z``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .model import DENSE_LIMIT, DenseOperator

PRUNE_TOL = 1e-14
MAX_DENSE_QUBITS = 14

_SIGMA = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]]),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True)
class PauliString:
    coeff: complex
    letters: str

    def __post_init__(self):
        letters = self.letters.upper()
        if not letters or set(letters) - set("IXYZ"):
            raise ValueError(f"invalid Pauli letters {self.letters!r}")
        object.__setattr__(self, "letters", letters)
        object.__setattr__(self, "coeff", complex(self.coeff))

    @property
    def n_qubits(self) -> int:
        return len(self.letters)

    def masks(self) -> tuple[int, int]:
        """``(x_mask, z_mask)`` with qubit 0 on the most significant bit."""
        n = len(self.letters)
        x = z = 0
        for q, ch in enumerate(self.letters):
            bit = 1 << (n - 1 - q)
            if ch in "XY":
                x |= bit
            if ch in "ZY":
                z |= bit
        return x, z


@dataclass
class PauliHamiltonian:
    """Weighted sum of Pauli strings with duplicates merged and zeros pruned."""

    n_qubits: int
    terms: list[PauliString] = field(default_factory=list)

    def __post_init__(self):
        merged: dict[str, complex] = {}
        for t in self.terms:
            if t.n_qubits != self.n_qubits:
                raise ValueError(f"term {t.letters} does not act on {self.n_qubits} qubits")
            merged[t.letters] = merged.get(t.letters, 0) + t.coeff
        self.terms = [PauliString(c, s) for s, c in merged.items() if abs(c) > PRUNE_TOL]

    def __len__(self) -> int:
        return len(self.terms)

    def as_dict(self) -> dict[str, complex]:
        return {t.letters: t.coeff for t in self.terms}

    @property
    def is_hermitian(self) -> bool:
        return all(abs(t.coeff.imag) <= 1e-13 for t in self.terms)

    def to_text(self) -> str:
        """One ``<re> <im> <letters>`` line per term, shortest exact float repr."""
        return "".join(f"{t.coeff.real!r} {t.coeff.imag!r} {t.letters}\n" for t in self.terms)

    @classmethod
    def from_text(cls, text: str) -> PauliHamiltonian:
        terms = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(f"line {lineno}: expected '<re> <im> <letters>'")
            terms.append(PauliString(complex(float(parts[0]), float(parts[1])), parts[2]))
        if not terms:
            raise ValueError("no Pauli terms found")
        return cls(terms[0].n_qubits, terms)

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(coeffs, x_masks, z_masks)`` with the ``i^{#Y}`` phase folded into ``coeffs``."""
        coeffs = np.empty(len(self.terms), dtype=complex)
        xs = np.empty(len(self.terms), dtype=np.int64)
        zs = np.empty(len(self.terms), dtype=np.int64)
        for k, t in enumerate(self.terms):
            xs[k], zs[k] = t.masks()
            coeffs[k] = t.coeff * (1j ** t.letters.count("Y"))
        return coeffs, xs, zs


def site_ops_pauli_lmax_half() -> dict[str, DenseOperator]:
    """Single-site kinetic term and field components at ``l_max = 1/2`` in Pauli form."""
    x, y, z = _SIGMA["X"], _SIGMA["Y"], _SIGMA["Z"]
    scale = 1.0 / (3.0 * math.sqrt(2.0))
    return {
        "H0": DenseOperator(0.75 * _SIGMA["I"], hermitian=True),
        "n_plus": DenseOperator(-scale * (x + 1j * y)),
        "n_minus": DenseOperator(-scale * (x - 1j * y)),
        "n_z": DenseOperator(z / 3.0, hermitian=True),
    }


def _popcount_parity(values: np.ndarray) -> np.ndarray:
    """Parity of the bit count of each non-negative integer."""
    v = values.copy()
    parity = np.zeros_like(v)
    while np.any(v):
        parity ^= v & 1
        v >>= 1
    return parity


def _walsh_hadamard(a: np.ndarray) -> np.ndarray:
    """Unnormalised transform ``out[z] = sum_j (-1)^{popcount(j & z)} a[j]``."""
    out = a.copy()
    n = out.shape[-1]
    h = 1
    while h < n:
        view = out.reshape(-1, n // (2 * h), 2, h)
        top = view[:, :, 0, :].copy()
        view[:, :, 0, :] += view[:, :, 1, :]
        view[:, :, 1, :] = top - view[:, :, 1, :]
        h *= 2
    return out


def pauli_decompose(op: DenseOperator | np.ndarray, n_qubits: int) -> PauliHamiltonian:
    """Coefficients ``Tr(P op) / 2^n`` for every Pauli string ``P``.

    For each X-mask the diagonal band ``op[j, j ^ x]`` is Walsh-Hadamard
    transformed, giving all Z-masks at once in ``O(n 4^n)``.
    """
    matrix = op.toarray() if isinstance(op, DenseOperator) else np.asarray(op)
    dim = 2**n_qubits
    if matrix.shape != (dim, dim):
        raise ValueError(f"operator of shape {matrix.shape} is not 2^{n_qubits}-dimensional")
    j = np.arange(dim)
    z_masks = np.arange(dim)
    terms = []
    for x in range(dim):
        band = matrix[j, j ^ x]
        traces = _walsh_hadamard(band.astype(complex))
        for z in np.flatnonzero(np.abs(traces) > PRUNE_TOL * dim):
            letters = _letters(x, int(z_masks[z]), n_qubits)
            n_y = letters.count("Y")
            coeff = traces[z] * (1j**n_y) / dim  # Tr(P A) = i^{nY} sum_j (-1)^{j.z} A[j, j^x]
            if abs(coeff) > PRUNE_TOL:
                terms.append(PauliString(coeff, letters))
    if not terms:
        terms.append(PauliString(0, "I" * n_qubits))
    return PauliHamiltonian(n_qubits, terms)


def _letters(x: int, z: int, n: int) -> str:
    out = []
    for q in range(n):
        bit = 1 << (n - 1 - q)
        out.append("IXZY"[(1 if x & bit else 0) + (2 if z & bit else 0)])
    return "".join(out)


def pauli_to_dense(ph: PauliHamiltonian) -> DenseOperator:
    """Kronecker expansion, sparse above :data:`model.DENSE_LIMIT`."""
    n = ph.n_qubits
    if n > MAX_DENSE_QUBITS:
        raise ValueError(f"{n} qubits exceeds the expansion limit of {MAX_DENSE_QUBITS}")
    mat = pauli_sparse(ph)
    if not np.any(mat.data.imag):
        mat = mat.real
    matrix = mat if 2**n > DENSE_LIMIT else mat.toarray()
    return DenseOperator(matrix, hermitian=ph.is_hermitian)


def pauli_sparse(ph: PauliHamiltonian) -> sp.csr_matrix:
    """CSR matrix of ``ph``; entry ``[j ^ x, j] = c i^{nY} (-1)^{popcount(j & z)}``."""
    dim = 2**ph.n_qubits
    coeffs, xs, zs = ph.arrays()
    j = np.arange(dim)
    rows, cols, vals = [], [], []
    for c, x, z in zip(coeffs, xs, zs):
        sign = 1 - 2 * _popcount_parity(j & z)
        rows.append(j ^ x)
        cols.append(j)
        vals.append(c * sign)
    if not rows:
        return sp.csr_matrix((dim, dim), dtype=complex)
    mat = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim)
    ).tocsr()
    mat.sum_duplicates()
    mat.data[np.abs(mat.data) <= PRUNE_TOL] = 0
    mat.eliminate_zeros()
    return mat


def pauli_kron(letters: str) -> np.ndarray:
    """Dense matrix of a single Pauli string by explicit Kronecker products."""
    out = np.ones((1, 1), dtype=complex)
    for ch in letters:
        out = np.kron(out, _SIGMA[ch])
    return out
