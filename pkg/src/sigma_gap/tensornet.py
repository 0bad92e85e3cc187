"""Matrix product states and operators, and a two-site DMRG ground-state solver.

Index conventions
-----------------
MPS site tensors have shape ``(left_bond, physical, right_bond)``.
MPO site tensors have shape ``(left_bond, phys_out, phys_in, right_bond)``.
Boundary bonds have dimension one. Site 0 is the leftmost Kronecker factor
of the dense representation.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .lanczos import lanczos_ground
from .model import HamiltonianSpec, build_site_basis, field_operators, kinetic_matrix

log = logging.getLogger(__name__)

MAX_DENSE_STATE = 2_000_000


class MPS:
    """Finite open-boundary matrix product state with a tracked orthogonality center.

    ``center`` is ``None`` when no gauge is known (e.g. freshly built from
    arbitrary tensors); :meth:`canonicalize` establishes one.
    """

    def __init__(self, tensors: Sequence[np.ndarray], center: int | None = None):
        tensors = [np.asarray(t) for t in tensors]
        if not tensors:
            raise ValueError("MPS needs at least one site")
        for k, t in enumerate(tensors):
            if t.ndim != 3:
                raise ValueError(f"site {k}: expected rank-3 tensor, got shape {t.shape}")
            if k and tensors[k - 1].shape[2] != t.shape[0]:
                raise ValueError(f"bond mismatch between sites {k - 1} and {k}")
        if tensors[0].shape[0] != 1 or tensors[-1].shape[2] != 1:
            raise ValueError("boundary bonds must have dimension 1")
        self.tensors = tensors
        self.center = center

    def __len__(self) -> int:
        return len(self.tensors)

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    @property
    def local_dims(self) -> list[int]:
        return [t.shape[1] for t in self.tensors]

    @property
    def bond_dims(self) -> list[int]:
        """Internal bond dimensions (``n_sites - 1`` entries)."""
        return [t.shape[2] for t in self.tensors[:-1]]

    @property
    def dtype(self):
        return np.result_type(*self.tensors)

    def copy(self) -> MPS:
        return MPS([t.copy() for t in self.tensors], self.center)

    @classmethod
    def product_state(cls, local_states: Sequence[np.ndarray]) -> MPS:
        tensors = [np.asarray(v).reshape(1, -1, 1) for v in local_states]
        return cls(tensors, center=0).normalize()

    @classmethod
    def basis_state(cls, local_dims: Sequence[int], indices: Sequence[int]) -> MPS:
        vecs = []
        for d, i in zip(local_dims, indices):
            v = np.zeros(d)
            v[i] = 1.0
            vecs.append(v)
        return cls.product_state(vecs)

    @classmethod
    def random(
        cls, local_dims: Sequence[int], bond_dim: int, rng: np.random.Generator | int | None = None,
        dtype=float,
    ) -> MPS:
        """Random MPS, right-canonicalised and normalised, center at site 0."""
        rng = np.random.default_rng(rng)
        n = len(local_dims)
        bonds = [1]
        for k in range(1, n):
            left = math.prod(local_dims[:k])
            right = math.prod(local_dims[k:])
            bonds.append(min(bond_dim, left, right))
        bonds.append(1)
        tensors = []
        for k, d in enumerate(local_dims):
            shape = (bonds[k], d, bonds[k + 1])
            t = rng.standard_normal(shape)
            if np.issubdtype(np.dtype(dtype), np.complexfloating):
                t = t + 1j * rng.standard_normal(shape)
            tensors.append(t.astype(dtype))
        return cls(tensors).canonicalize(0).normalize()

    @classmethod
    def from_statevector(
        cls, vec: np.ndarray, local_dims: Sequence[int], max_bond: int | None = None,
        cutoff: float = 0.0,
    ) -> MPS:
        """Exact (or truncated) SVD factorisation of a dense vector, left-canonical."""
        vec = np.asarray(vec)
        if vec.size != math.prod(local_dims):
            raise ValueError("vector length does not match local dimensions")
        tensors = []
        rest = vec.reshape(1, -1)
        for d in local_dims[:-1]:
            chi = rest.shape[0]
            rest = rest.reshape(chi * d, -1)
            u, s, vh = np.linalg.svd(rest, full_matrices=False)
            keep, _ = _truncation_rank(s, max_bond, cutoff)
            tensors.append(u[:, :keep].reshape(chi, d, keep))
            rest = s[:keep, None] * vh[:keep]
        tensors.append(rest.reshape(rest.shape[0], local_dims[-1], 1))
        return cls(tensors, center=len(local_dims) - 1)

    def normalize(self) -> MPS:
        if self.center is None:
            self.canonicalize(0)
        t = self.tensors[self.center]
        self.tensors[self.center] = t / np.linalg.norm(t)
        return self

    def norm(self) -> float:
        return math.sqrt(abs(inner(self, self)))

    def canonicalize(self, center: int = 0) -> MPS:
        """Bring the state into mixed canonical form around ``center`` (in place)."""
        n = self.n_sites
        if not 0 <= center < n:
            raise IndexError(f"center {center} out of range")
        for k in range(center):
            self._shift_right(k)
        for k in range(n - 1, center, -1):
            self._shift_left(k)
        self.center = center
        return self

    def move_center(self, target: int) -> MPS:
        if self.center is None:
            return self.canonicalize(target)
        while self.center < target:
            self._shift_right(self.center)
            self.center += 1
        while self.center > target:
            self._shift_left(self.center)
            self.center -= 1
        return self

    def _shift_right(self, k: int) -> None:
        t = self.tensors[k]
        chi_l, d, chi_r = t.shape
        q, r = np.linalg.qr(t.reshape(chi_l * d, chi_r))
        self.tensors[k] = q.reshape(chi_l, d, q.shape[1])
        self.tensors[k + 1] = np.tensordot(r, self.tensors[k + 1], axes=(1, 0))

    def _shift_left(self, k: int) -> None:
        t = self.tensors[k]
        chi_l, d, chi_r = t.shape
        q, r = np.linalg.qr(t.reshape(chi_l, d * chi_r).T)
        self.tensors[k] = q.T.reshape(q.shape[1], d, chi_r)
        self.tensors[k - 1] = np.tensordot(self.tensors[k - 1], r.T, axes=(2, 0))

    def isometry_errors(self) -> list[float]:
        """Deviation from left (right) isometry for sites left (right) of the center."""
        out = []
        for k, t in enumerate(self.tensors):
            if self.center is None or k == self.center:
                out.append(0.0)
                continue
            if k < self.center:
                m = t.reshape(-1, t.shape[2])
            else:
                m = t.reshape(t.shape[0], -1).T
            gram = m.conj().T @ m
            out.append(float(np.max(np.abs(gram - np.eye(gram.shape[0])))))
        return out

    def schmidt_values(self, bond: int) -> np.ndarray:
        """Normalised Schmidt coefficients across the cut between sites ``bond`` and ``bond + 1``."""
        if not 0 <= bond < self.n_sites - 1:
            raise IndexError(f"bond {bond} out of range")
        work = self.copy().move_center(bond)
        t = work.tensors[bond]
        s = np.linalg.svd(t.reshape(-1, t.shape[2]), compute_uv=False)
        return s / np.linalg.norm(s)

    def reversed(self) -> MPS:
        tensors = [t.transpose(2, 1, 0) for t in reversed(self.tensors)]
        center = None if self.center is None else self.n_sites - 1 - self.center
        return MPS(tensors, center)


class MPO:
    """Finite matrix product operator."""

    def __init__(self, tensors: Sequence[np.ndarray]):
        tensors = [np.asarray(t) for t in tensors]
        for k, w in enumerate(tensors):
            if w.ndim != 4:
                raise ValueError(f"site {k}: expected rank-4 tensor, got shape {w.shape}")
            if k and tensors[k - 1].shape[3] != w.shape[0]:
                raise ValueError(f"bond mismatch between sites {k - 1} and {k}")
        if tensors[0].shape[0] != 1 or tensors[-1].shape[3] != 1:
            raise ValueError("boundary bonds must have dimension 1")
        self.tensors = tensors

    def __len__(self) -> int:
        return len(self.tensors)

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    @property
    def local_dims(self) -> list[int]:
        return [w.shape[1] for w in self.tensors]

    @property
    def bond_dims(self) -> list[int]:
        return [w.shape[3] for w in self.tensors[:-1]]

    @property
    def dtype(self):
        return np.result_type(*self.tensors)

    def to_dense(self) -> np.ndarray:
        dim = math.prod(self.local_dims)
        if dim > 4096:
            raise ValueError(f"dense MPO of dimension {dim} is too large")
        out = self.tensors[0][0]  # (d_out, d_in, w)
        for w in self.tensors[1:]:
            rows, cols = out.shape[0], out.shape[1]
            _, d_out, d_in, w_right = w.shape
            out = np.tensordot(out, w, axes=(-1, 0))  # (rows, cols, d_out, d_in, w')
            out = out.transpose(0, 2, 1, 3, 4).reshape(rows * d_out, cols * d_in, w_right)
        return out[:, :, 0]

    def reversed(self) -> MPO:
        return MPO([w.transpose(3, 1, 2, 0) for w in reversed(self.tensors)])

    @classmethod
    def onsite_sum(cls, op: np.ndarray, n_sites: int) -> MPO:
        """``sum_k op_k`` with bond dimension 2."""
        op = np.asarray(op)
        d = op.shape[0]
        eye = np.eye(d, dtype=op.dtype)
        bulk = np.zeros((2, d, d, 2), dtype=op.dtype)
        bulk[0, :, :, 0] = eye
        bulk[0, :, :, 1] = op
        bulk[1, :, :, 1] = eye
        if n_sites == 1:
            return cls([op.reshape(1, d, d, 1)])
        return cls([bulk[:1]] + [bulk] * (n_sites - 2) + [bulk[:, :, :, 1:]])

    @classmethod
    def identity(cls, local_dims: Sequence[int]) -> MPO:
        return cls([np.eye(d).reshape(1, d, d, 1) for d in local_dims])


def build_mpo(spec: HamiltonianSpec) -> MPO:
    """Finite-state-machine MPO of the chain Hamiltonian.

    Channels: 0 = nothing placed yet, 1-3 = ``beta n+``, ``beta n-``,
    ``beta nz`` waiting for their right partner, 4 = complete. Periodic chains
    add channels 5-7 that carry ``beta n+``, ``beta n-``, ``beta nz`` of the
    first site across the whole chain to close the ring bond at the last site.
    """
    basis = build_site_basis(spec.l_max)
    d = basis.dim
    ops = field_operators(basis)
    n_plus, n_minus, n_z = ops["n_plus"], ops["n_minus"], ops["n_z"]
    onsite = kinetic_matrix(basis).matrix / (2.0 * spec.beta)
    eye = np.eye(d)
    beta = spec.beta
    ring = spec.boundary == "periodic" and spec.n_sites > 2
    w = 8 if ring else 5

    bulk = np.zeros((w, d, d, w))
    bulk[0, :, :, 0] = eye
    bulk[0, :, :, 1] = beta * n_plus
    bulk[0, :, :, 2] = beta * n_minus
    bulk[0, :, :, 3] = beta * n_z
    bulk[0, :, :, 4] = onsite
    bulk[1, :, :, 4] = n_minus
    bulk[2, :, :, 4] = n_plus
    bulk[3, :, :, 4] = n_z
    bulk[4, :, :, 4] = eye
    if ring:
        for ch in (5, 6, 7):
            bulk[ch, :, :, ch] = eye

    first = bulk[:1].copy()
    last = bulk[:, :, :, 4:5].copy()
    if ring:
        first[0, :, :, 5] = beta * n_plus
        first[0, :, :, 6] = beta * n_minus
        first[0, :, :, 7] = beta * n_z
        last[5, :, :, 0] = n_minus
        last[6, :, :, 0] = n_plus
        last[7, :, :, 0] = n_z
    return MPO([first] + [bulk] * (spec.n_sites - 2) + [last])


def inner(bra: MPS, ket: MPS) -> complex:
    """``<bra|ket>`` by left-to-right transfer-matrix contraction."""
    if bra.local_dims != ket.local_dims:
        raise ValueError("MPS shapes do not match")
    env = np.ones((1, 1))
    for a, b in zip(bra.tensors, ket.tensors):
        env = np.tensordot(env, b, axes=(1, 0))  # (a, s, b')
        env = np.tensordot(a.conj(), env, axes=([0, 1], [0, 1]))  # (a', b')
    return complex(env[0, 0])


def mps_expectation(mps: MPS, mpo: MPO) -> float:
    """``<psi|H|psi> / <psi|psi>`` by exact contraction."""
    if mps.local_dims != mpo.local_dims:
        raise ValueError(f"MPS dims {mps.local_dims} do not match MPO dims {mpo.local_dims}")
    env = np.ones((1, 1, 1))
    for a, w in zip(mps.tensors, mpo.tensors):
        env = _extend_left(env, a, w)
    value = env[0, 0, 0] / inner(mps, mps)
    return float(np.real(value))


def mps_to_statevector(mps: MPS) -> np.ndarray:
    """Contract an MPS into a dense vector (site 0 most significant)."""
    dim = math.prod(mps.local_dims)
    if dim > MAX_DENSE_STATE:
        raise ValueError(f"dense state of dimension {dim} exceeds {MAX_DENSE_STATE}")
    out = mps.tensors[0].reshape(-1, mps.tensors[0].shape[2])
    for t in mps.tensors[1:]:
        out = np.tensordot(out, t, axes=(1, 0)).reshape(-1, t.shape[2])
    return out.reshape(-1)


def parameter_count(n_sites: int, local_dim: int, max_bond: int) -> int:
    """Size estimate ``n_sites * local_dim * max_bond**2`` of an MPS."""
    for name, value in (("n_sites", n_sites), ("local_dim", local_dim), ("max_bond", max_bond)):
        if value < 1:
            raise ValueError(f"{name} must be positive")
    return n_sites * local_dim * max_bond**2


def _extend_left(env, a, w):
    # env (bra, mpo, ket) -> next env
    x = np.tensordot(env, a, axes=(2, 0))  # (bra, mpo, s_in, ket')
    x = np.tensordot(x, w, axes=([1, 2], [0, 2]))  # (bra, ket', s_out, mpo')
    x = np.tensordot(a.conj(), x, axes=([0, 1], [0, 2]))  # (bra', ket', mpo')
    return x.transpose(0, 2, 1)


def _extend_right(env, b, w):
    # env (bra, mpo, ket) on the right of site with tensor b
    x = np.tensordot(b, env, axes=(2, 2))  # (ket_l, s_in, bra, mpo)
    x = np.tensordot(w, x, axes=([2, 3], [1, 3]))  # (mpo_l, s_out, ket_l, bra)
    x = np.tensordot(b.conj(), x, axes=([1, 2], [1, 3]))  # (bra_l, mpo_l, ket_l)
    return x


def _apply_two_site(left, w1, w2, right, theta):
    x = np.tensordot(left, theta, axes=(2, 0))  # (a, w, s1, s2, b')
    x = np.tensordot(x, w1, axes=([1, 2], [0, 2]))  # (a, s2, b', s1o, w1)
    x = np.tensordot(x, w2, axes=([4, 1], [0, 2]))  # (a, b', s1o, s2o, w2)
    x = np.tensordot(x, right, axes=([1, 4], [2, 1]))  # (a, s1o, s2o, b)
    return x


def _truncation_rank(s: np.ndarray, max_bond: int | None, cutoff: float) -> tuple[int, float]:
    """Number of singular values kept and the discarded weight (relative)."""
    weights = s**2
    total = weights.sum()
    if total == 0:
        return 1, 0.0
    weights = weights / total
    # tail[k] = weight discarded when keeping k values
    tail = np.concatenate([np.cumsum(weights[::-1])[::-1], [0.0]])
    keep = int(np.argmax(tail <= cutoff)) if cutoff > 0 else int(np.count_nonzero(s))
    keep = max(1, keep)
    if max_bond is not None:
        keep = min(keep, max_bond)
    return keep, float(tail[keep])


@dataclass
class DmrgConfig:
    max_bond: int = 256
    cutoff: float = 1e-10
    max_sweeps: int = 50
    energy_tol: float = 1e-10
    lanczos_iters: int = 12
    lanczos_restarts: int = 1
    lanczos_tol: float = 1e-12
    min_sweeps: int = 2
    init_bond: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.cutoff < 0:
            raise ValueError("cutoff must be non-negative")
        if self.max_bond < 1:
            raise ValueError("max_bond must be >= 1")
        if self.max_sweeps < 1 or self.lanczos_iters < 1:
            raise ValueError("max_sweeps and lanczos_iters must be >= 1")


@dataclass
class DmrgResult:
    energy: float
    mps: MPS
    truncation_error: float
    converged: bool
    sweep_energies: list[float] = field(default_factory=list)
    max_bond_used: int = 1

    def __iter__(self):
        # unpacks as (energy, mps, truncation_error)
        return iter((self.energy, self.mps, self.truncation_error))


def dmrg_ground_state(
    mpo: MPO,
    config: DmrgConfig | None = None,
    *,
    initial: MPS | None = None,
    callback: Callable[[int, int, MPS], None] | None = None,
) -> DmrgResult:
    """Two-site DMRG for the lowest eigenstate of ``mpo``.

    Each sweep goes left to right and back. The local problem is solved with
    :func:`lanczos_ground` seeded by the current two-site tensor, and the
    result is split by an SVD truncated to ``config.cutoff`` discarded weight
    and at most ``config.max_bond`` states. ``truncation_error`` is the
    largest discarded weight during the final sweep.

    ``callback(sweep, site, mps)`` runs after every local update, with the
    orthogonality center placed on the updated site.
    """
    config = config or DmrgConfig()
    n = mpo.n_sites
    dims = mpo.local_dims
    if n < 2:
        raise ValueError("DMRG needs at least two sites")
    dtype = np.result_type(mpo.dtype, float)
    if initial is None:
        mps = MPS.random(dims, config.init_bond, rng=config.seed, dtype=dtype)
    else:
        if initial.local_dims != dims:
            raise ValueError("initial MPS does not match the MPO")
        mps = initial.copy()
    mps.canonicalize(0).normalize()

    left_envs: list[np.ndarray | None] = [None] * (n + 1)
    right_envs: list[np.ndarray | None] = [None] * (n + 1)
    left_envs[0] = np.ones((1, 1, 1))
    right_envs[n] = np.ones((1, 1, 1))
    for k in range(n - 1, 0, -1):
        right_envs[k] = _extend_right(right_envs[k + 1], mps.tensors[k], mpo.tensors[k])

    sweep_energies: list[float] = []
    converged = False
    energy = float("nan")
    trunc = 0.0
    max_used = max(mps.bond_dims)
    for sweep in range(config.max_sweeps):
        trunc = 0.0
        schedule = [(k, "right") for k in range(n - 1)] + [(k, "left") for k in range(n - 2, -1, -1)]
        for k, direction in schedule:
            theta = np.tensordot(mps.tensors[k], mps.tensors[k + 1], axes=(2, 0))
            le, re = left_envs[k], right_envs[k + 2]
            w1, w2 = mpo.tensors[k], mpo.tensors[k + 1]
            energy, theta = lanczos_ground(
                lambda x: _apply_two_site(le, w1, w2, re, x),
                theta,
                n_iter=config.lanczos_iters,
                tol=config.lanczos_tol,
                max_restarts=config.lanczos_restarts,
            )
            if not np.isfinite(energy):
                raise RuntimeError("local eigensolver returned a non-finite energy")
            chi_l, d1, d2, chi_r = theta.shape
            u, s, vh = np.linalg.svd(theta.reshape(chi_l * d1, d2 * chi_r), full_matrices=False)
            keep, discarded = _truncation_rank(s, config.max_bond, config.cutoff)
            trunc = max(trunc, discarded)
            max_used = max(max_used, keep)
            s = s[:keep] / np.linalg.norm(s[:keep])
            u = u[:, :keep].reshape(chi_l, d1, keep)
            vh = vh[:keep].reshape(keep, d2, chi_r)
            if direction == "right":
                mps.tensors[k] = u
                mps.tensors[k + 1] = s[:, None, None] * vh
                mps.center = k + 1
                left_envs[k + 1] = _extend_left(left_envs[k], u, w1)
            else:
                mps.tensors[k] = u * s[None, None, :]
                mps.tensors[k + 1] = vh
                mps.center = k
                right_envs[k + 1] = _extend_right(right_envs[k + 2], vh, w2)
            if callback is not None:
                callback(sweep, k, mps)
        sweep_energies.append(energy)
        log.debug("sweep %d energy %.15g max bond %d trunc %.2e", sweep, energy, max(mps.bond_dims), trunc)
        if sweep + 1 >= config.min_sweeps and len(sweep_energies) > 1:
            if abs(sweep_energies[-1] - sweep_energies[-2]) < config.energy_tol:
                converged = True
                break
    if not converged:
        log.warning("DMRG stopped after %d sweeps without reaching energy_tol", len(sweep_energies))
    return DmrgResult(
        energy=float(energy),
        mps=mps,
        truncation_error=trunc,
        converged=converged,
        sweep_energies=sweep_energies,
        max_bond_used=max_used,
    )


def write_mps(mps: MPS, path) -> None:
    """Text checkpoint: a header, then per site its shape and row-major ``re im`` entries."""
    with open(path, "w") as fh:
        center = -1 if mps.center is None else mps.center
        fh.write(f"MPS {mps.n_sites} {center}\n")
        for t in mps.tensors:
            fh.write("shape {} {} {}\n".format(*t.shape))
            for z in np.asarray(t, dtype=complex).ravel():
                fh.write(f"{z.real:.17g} {z.imag:.17g}\n")


def read_mps(path) -> MPS:
    with open(path) as fh:
        lines = iter(fh.read().splitlines())
    head = next(lines).split()
    if head[0] != "MPS":
        raise ValueError(f"{path}: not an MPS checkpoint")
    n_sites, center = int(head[1]), int(head[2])
    tensors = []
    for _ in range(n_sites):
        tag, *shape = next(lines).split()
        if tag != "shape":
            raise ValueError(f"{path}: expected a shape line")
        shape = tuple(int(x) for x in shape)
        data = np.empty(math.prod(shape), dtype=complex)
        for i in range(data.size):
            re, im = next(lines).split()
            data[i] = complex(float(re), float(im))
        t = data.reshape(shape)
        tensors.append(t.real.copy() if not np.any(t.imag) else t)
    return MPS(tensors, None if center < 0 else center)
