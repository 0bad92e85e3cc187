"""Noiseless statevector simulation of RY/CZ/CNOT variational circuits.

Qubit 0 is the most significant bit of an amplitude index, matching the
Kronecker ordering of :mod:`sigma_gap.pauli`. Angles are in radians and the
parameter vector is laid out in gate-definition order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .pauli import PauliHamiltonian, _popcount_parity, pauli_sparse

GATE_KINDS = ("RY", "CZ", "CNOT")
ANSATZ_KINDS = ("S2D", "QMPS", "QMPS_BLOCK")
NORM_TOL = 1e-12


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple[int, ...]
    slot: int | None = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        arity = 1 if self.kind == "RY" else 2
        if len(self.qubits) != arity or len(set(self.qubits)) != arity:
            raise ValueError(f"{self.kind} needs {arity} distinct qubits, got {self.qubits}")
        if (self.kind == "RY") != (self.slot is not None):
            raise ValueError("RY gates take a parameter slot, CZ/CNOT gates do not")


@dataclass
class Circuit:
    n_qubits: int
    gates: list[Gate] = field(default_factory=list)
    n_params: int = 0

    def __post_init__(self):
        seen = []
        for g in self.gates:
            if any(q < 0 or q >= self.n_qubits for q in g.qubits):
                raise ValueError(f"gate {g} addresses a qubit outside 0..{self.n_qubits - 1}")
            if g.slot is not None:
                seen.append(g.slot)
        if sorted(seen) != list(range(self.n_params)):
            raise ValueError("every parameter slot must be used exactly once")

    def encoded(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Gate list as ``(kinds, q0, q1, slots)`` integer arrays for the compiled kernels."""
        cached = self.__dict__.get("_encoded")
        if cached is not None and cached[0] == len(self.gates):
            return cached[1]
        codes = {"RY": _kernels.RY, "CZ": _kernels.CZ, "CNOT": _kernels.CNOT}
        kinds = np.array([codes[g.kind] for g in self.gates], dtype=np.int64)
        q0 = np.array([g.qubits[0] for g in self.gates], dtype=np.int64)
        q1 = np.array([g.qubits[-1] for g in self.gates], dtype=np.int64)
        slots = np.array([-1 if g.slot is None else g.slot for g in self.gates], dtype=np.int64)
        arrays = (kinds, q0, q1, slots)
        self.__dict__["_encoded"] = (len(self.gates), arrays)
        return arrays

    def counts(self) -> dict[str, int]:
        out = {k: 0 for k in GATE_KINDS}
        for g in self.gates:
            out[g.kind] += 1
        return out

    def to_text(self) -> str:
        """One gate per line: ``RY q<i> slot<k>``, ``CZ q<i> q<j>``, ``CNOT q<i> q<j>``."""
        lines = [f"# qubits {self.n_qubits} params {self.n_params}"]
        for g in self.gates:
            if g.kind == "RY":
                lines.append(f"RY q{g.qubits[0]} slot{g.slot}")
            else:
                lines.append(f"{g.kind} q{g.qubits[0]} q{g.qubits[1]}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> Circuit:
        n_qubits = n_params = None
        gates = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if parts[0] == "#":
                if len(parts) == 5 and parts[1] == "qubits" and parts[3] == "params":
                    n_qubits, n_params = int(parts[2]), int(parts[4])
                continue
            try:
                if parts[0] == "RY" and len(parts) == 3:
                    gates.append(Gate("RY", (_strip(parts[1], "q"),), _strip(parts[2], "slot")))
                elif parts[0] in ("CZ", "CNOT") and len(parts) == 3:
                    gates.append(Gate(parts[0], (_strip(parts[1], "q"), _strip(parts[2], "q"))))
                else:
                    raise ValueError(line)
            except ValueError as exc:
                raise ValueError(f"line {lineno}: cannot parse gate {line!r}") from exc
        if n_qubits is None:
            n_qubits = 1 + max((q for g in gates for q in g.qubits), default=0)
            n_params = sum(g.slot is not None for g in gates)
        return cls(n_qubits, gates, n_params)


def _strip(token: str, prefix: str) -> int:
    if not token.startswith(prefix):
        raise ValueError(token)
    return int(token[len(prefix):])


@dataclass(frozen=True)
class AnsatzSpec:
    kind: str
    n_qubits: int
    layers: int

    def __post_init__(self):
        if self.kind not in ANSATZ_KINDS:
            raise ValueError(f"ansatz kind must be one of {ANSATZ_KINDS}, got {self.kind!r}")
        if self.n_qubits < 2:
            raise ValueError("ansatz needs at least two qubits")
        if self.layers < 1:
            raise ValueError("ansatz needs at least one layer")

    def build(self) -> Circuit:
        return {"S2D": build_s2d, "QMPS": build_qmps, "QMPS_BLOCK": build_qmps_block}[self.kind](
            self.n_qubits, self.layers
        )


class _Builder:
    def __init__(self, n_qubits: int):
        self.n_qubits = n_qubits
        self.gates: list[Gate] = []
        self.slot = 0

    def ry(self, q: int) -> None:
        self.gates.append(Gate("RY", (q,), self.slot))
        self.slot += 1

    def two(self, kind: str, a: int, b: int) -> None:
        self.gates.append(Gate(kind, (a, b)))

    def circuit(self) -> Circuit:
        return Circuit(self.n_qubits, self.gates, self.slot)


def _check_size(n_qubits: int, layers: int) -> None:
    if n_qubits < 2:
        raise ValueError("ansatz needs at least two qubits")
    if layers < 1:
        raise ValueError("ansatz needs at least one layer")


def build_s2d(n_qubits: int, layers: int) -> Circuit:
    """Simplified two-design: RY on every qubit, then per layer CZ+RY blocks on
    pairs (0,1), (2,3), ... followed by pairs (1,2), (3,4), ...

    Each layer holds ``n_qubits - 1`` blocks, so the circuit has
    ``n_qubits + 2 * layers * (n_qubits - 1)`` parameters.
    """
    _check_size(n_qubits, layers)
    b = _Builder(n_qubits)
    for q in range(n_qubits):
        b.ry(q)
    for _ in range(layers):
        for start in (0, 1):
            for a in range(start, n_qubits - 1, 2):
                b.two("CZ", a, a + 1)
                b.ry(a)
                b.ry(a + 1)
    return b.circuit()


def build_qmps(n_qubits: int, layers: int) -> Circuit:
    """MPS-inspired staircase: per layer, blocks on (0,1), (1,2), ... each made
    of an RY on both qubits followed by a CNOT (control on the left qubit)."""
    _check_size(n_qubits, layers)
    b = _Builder(n_qubits)
    for _ in range(layers):
        for a in range(n_qubits - 1):
            b.ry(a)
            b.ry(a + 1)
            b.two("CNOT", a, a + 1)
    return b.circuit()


def build_qmps_block(n_qubits: int, layers: int) -> Circuit:
    """Block-extended staircase: all ``layers`` blocks are stacked on a pair
    before the staircase advances to the next pair.

    Same blocks and parameter count as :func:`build_qmps`; only the order in
    which they are applied differs.
    """
    _check_size(n_qubits, layers)
    b = _Builder(n_qubits)
    for a in range(n_qubits - 1):
        for _ in range(layers):
            b.ry(a)
            b.ry(a + 1)
            b.two("CNOT", a, a + 1)
    return b.circuit()


def zero_state(n_qubits: int) -> np.ndarray:
    psi = np.zeros(2**n_qubits)
    psi[0] = 1.0
    return psi


def basis_state(bits: str) -> np.ndarray:
    """Computational basis state from a bit string, qubit 0 first (e.g. ``"0101"``)."""
    psi = np.zeros(2 ** len(bits))
    psi[int(bits, 2)] = 1.0
    return psi


def _check_params(circuit: Circuit, params) -> np.ndarray:
    params = np.asarray(params, dtype=float)
    if params.shape != (circuit.n_params,):
        raise ValueError(f"expected {circuit.n_params} parameters, got shape {params.shape}")
    return params


def apply(circuit: Circuit, params: Sequence[float], initial: np.ndarray | None = None) -> np.ndarray:
    """Evolve ``initial`` (default ``|0...0>``) through the circuit; returns a new array."""
    params = _check_params(circuit, params)
    n = circuit.n_qubits
    if initial is None:
        psi = zero_state(n)
    else:
        psi = np.array(initial, copy=True)
        if psi.shape != (2**n,):
            raise ValueError(f"initial state must have {2**n} amplitudes")
        if not np.issubdtype(psi.dtype, np.inexact):
            psi = psi.astype(float)
    _kernels.run_circuit(psi, n, *circuit.encoded(), params)
    return psi


def pauli_expectation(psi: np.ndarray, ph: PauliHamiltonian) -> float:
    """``sum_P c_P <psi|P|psi>`` evaluated term by term with bit masks."""
    n = ph.n_qubits
    if psi.shape != (2**n,):
        raise ValueError(f"state has {psi.size} amplitudes, Hamiltonian acts on {n} qubits")
    coeffs, xs, zs = ph.arrays()
    j = np.arange(psi.size)
    total = 0j
    for c, x, z in zip(coeffs, xs, zs):
        sign = 1 - 2 * _popcount_parity(j & z)
        # (P psi)[j ^ x] = c_phase * sign[j] * psi[j]
        total += c * np.vdot(psi[j ^ x], sign * psi)
    if abs(total.imag) > 1e-12 * max(1.0, abs(total.real)):
        raise ValueError(f"expectation has imaginary part {total.imag:.3e}; is H Hermitian?")
    return float(total.real)


def expectation(state: np.ndarray, H) -> float:
    """``<psi|H|psi>`` for a :class:`PauliHamiltonian` or a (sparse) matrix."""
    if isinstance(H, PauliHamiltonian):
        return pauli_expectation(state, H)
    value = np.vdot(state, H @ state)
    return float(np.real(value))


class Energy:
    """Cached ``theta -> <psi(theta)|H|psi(theta)>`` for one circuit and Hamiltonian.

    The Hamiltonian is converted once to a CSR matrix (real when possible).
    """

    def __init__(self, circuit: Circuit, H: PauliHamiltonian | np.ndarray | sp.spmatrix):
        self.circuit = circuit
        if isinstance(H, PauliHamiltonian):
            if H.n_qubits != circuit.n_qubits:
                raise ValueError("circuit and Hamiltonian act on different qubit counts")
            if not H.is_hermitian:
                raise ValueError("Hamiltonian must be Hermitian")
            mat = pauli_sparse(H)
        else:
            mat = sp.csr_matrix(H)
            if mat.shape != (2**circuit.n_qubits,) * 2:
                raise ValueError("Hamiltonian matrix does not match the circuit size")
        if not np.iscomplexobj(mat) or not np.any(mat.data.imag):
            mat = mat.real
        self.matrix = mat.tocsr()

    def __call__(self, params) -> float:
        return expectation(apply(self.circuit, params), self.matrix)

    def parameter_shift(self, params) -> np.ndarray:
        return gradient_parameter_shift(self.circuit, params, self.matrix)

    def adjoint(self, params) -> tuple[float, np.ndarray]:
        return energy_and_adjoint_gradient(self.circuit, params, self.matrix)


def gradient_parameter_shift(circuit: Circuit, params, H) -> np.ndarray:
    """``(E(theta_i + pi/2) - E(theta_i - pi/2)) / 2`` for every RY slot."""
    params = _check_params(circuit, params)
    grad = np.empty(circuit.n_params)
    shifted = params.copy()
    for i in range(circuit.n_params):
        shifted[i] = params[i] + math.pi / 2
        plus = expectation(apply(circuit, shifted), H)
        shifted[i] = params[i] - math.pi / 2
        minus = expectation(apply(circuit, shifted), H)
        shifted[i] = params[i]
        grad[i] = 0.5 * (plus - minus)
    return grad


def energy_and_adjoint_gradient(circuit: Circuit, params, H) -> tuple[float, np.ndarray]:
    """Energy and exact gradient by a reverse-mode sweep through the gate list.

    Gives the same derivative as the parameter-shift rule at the cost of about
    three circuit passes instead of ``2 * n_params``.
    """
    params = _check_params(circuit, params)
    mat = pauli_sparse(H) if isinstance(H, PauliHamiltonian) else sp.csr_matrix(H)
    if np.iscomplexobj(mat) and not np.any(mat.data.imag):
        mat = mat.real
    mat = mat.tocsr()
    psi = zero_state(circuit.n_qubits).astype(mat.dtype)
    lam = np.empty_like(psi)
    grad = np.zeros(circuit.n_params)
    energy = _kernels.adjoint_gradient(
        psi, lam, circuit.n_qubits, *circuit.encoded(), params,
        mat.indptr, mat.indices, mat.data, grad,
    )
    return float(energy), grad
