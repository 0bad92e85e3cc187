"""Entanglement entropy, energy density and central-charge fits."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .halfint import HalfInt
from .model import DenseOperator
from .tensornet import MPS

EIGEN_FLOOR = 1e-14
TRACE_TOL = 1e-8
METHODS = ("ED", "VQE-S2D", "VQE-QMPS", "VQE-QMPS_BLOCK", "DMRG")
CSV_COLUMNS = ("n_sites", "beta", "l_max_x2", "method", "energy", "energy_density", "entropy", "seed")


@dataclass
class EntropyPoint:
    n_sites: int
    beta: float
    l_max: HalfInt
    method: str
    entropy: float
    energy: float = math.nan
    seed: int = 0

    def __post_init__(self):
        self.l_max = HalfInt(self.l_max)
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.entropy < -1e-12:
            raise ValueError(f"negative entropy {self.entropy}")

    @property
    def energy_density(self) -> float:
        return energy_density(self.energy, self.n_sites)

    def csv_row(self) -> dict:
        return {
            "n_sites": self.n_sites,
            "beta": repr(float(self.beta)),
            "l_max_x2": self.l_max.twice,
            "method": self.method,
            "energy": repr(float(self.energy)),
            "energy_density": repr(float(self.energy_density)),
            "entropy": repr(float(self.entropy)),
            "seed": self.seed,
        }


@dataclass
class CentralChargeFit:
    c: float
    s0: float
    residual_rms: float
    points_used: list = field(default_factory=list)

    def to_text(self) -> str:
        pts = [
            {"n_sites": p.n_sites, "entropy": p.entropy} if isinstance(p, EntropyPoint)
            else {"n_sites": int(p[0]), "entropy": float(p[1])}
            for p in self.points_used
        ]
        doc = {"c": self.c, "s0": self.s0, "residual_rms": self.residual_rms, "points": pts}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _site_range(keep, n_sites: int) -> tuple[int, int]:
    if isinstance(keep, range):
        sites = list(keep)
    elif isinstance(keep, slice):
        sites = list(range(n_sites))[keep]
    else:
        sites = sorted(int(k) for k in keep)
    if not sites:
        raise ValueError("keep must select at least one site")
    if sites != list(range(sites[0], sites[-1] + 1)) or sites[0] < 0 or sites[-1] >= n_sites:
        raise ValueError(f"keep must be a contiguous range of sites in [0, {n_sites}), got {sites}")
    return sites[0], sites[-1] + 1


def reduced_density_matrix(state: np.ndarray, local_dims: Sequence[int], keep) -> DenseOperator:
    """``Tr_rest |psi><psi|`` for a contiguous block of sites (zero-based)."""
    state = np.asarray(state)
    local_dims = list(local_dims)
    if state.ndim != 1 or state.size != math.prod(local_dims):
        raise ValueError(f"state of size {state.size} does not match local dims {local_dims}")
    start, stop = _site_range(keep, len(local_dims))
    left = math.prod(local_dims[:start])
    mid = math.prod(local_dims[start:stop])
    psi = state.reshape(left, mid, -1)
    rho = np.einsum("akb,alb->kl", psi, psi.conj())
    rho = 0.5 * (rho + rho.conj().T)
    return DenseOperator(rho, hermitian=True)


def von_neumann_entropy(rho: DenseOperator | np.ndarray) -> float:
    """``-Tr rho ln rho`` over eigenvalues above :data:`EIGEN_FLOOR`."""
    mat = rho.toarray() if isinstance(rho, DenseOperator) else np.asarray(rho)
    trace = np.trace(mat).real
    if abs(trace - 1.0) > TRACE_TOL:
        raise ValueError(f"density matrix has trace {trace}, expected 1")
    return entropy_from_probabilities(np.linalg.eigvalsh(mat))


def entropy_from_probabilities(p: np.ndarray) -> float:
    p = np.asarray(p, dtype=float)
    p = p[p > EIGEN_FLOOR]
    return float(max(0.0, -np.sum(p * np.log(p))))


def half_chain_entropy(state: np.ndarray | MPS, n_sites: int, local_dims: Sequence[int] | None = None) -> float:
    """Entropy of sites ``0 .. n_sites/2 - 1``.

    MPS inputs use the Schmidt values at the central bond; dense vectors go
    through the reduced density matrix. ``local_dims`` defaults to a uniform
    dimension inferred from the vector length.
    """
    if n_sites % 2:
        raise ValueError(f"half-chain entropy needs an even number of sites, got {n_sites}")
    if isinstance(state, MPS):
        if state.n_sites != n_sites:
            raise ValueError("MPS length does not match n_sites")
        return entropy_from_probabilities(state.schmidt_values(n_sites // 2 - 1) ** 2)
    state = np.asarray(state)
    if local_dims is None:
        d = round(state.size ** (1.0 / n_sites))
        local_dims = [d] * n_sites
    half = n_sites // 2
    # trace out the larger side cheaply by keeping the smaller one
    return von_neumann_entropy(reduced_density_matrix(state, local_dims, range(half)))


def energy_density(energy: float, n_sites: int) -> float:
    if n_sites < 1:
        raise ValueError("n_sites must be >= 1")
    return energy / n_sites


def fit_central_charge(points: Iterable) -> CentralChargeFit:
    """Least-squares fit of ``S = (c/3) ln(N/pi) + S0`` to periodic-chain entropies.

    ``points`` holds :class:`EntropyPoint` objects or ``(n_sites, entropy)`` pairs.
    """
    points = list(points)
    ns, ss = [], []
    for p in points:
        if isinstance(p, EntropyPoint):
            ns.append(p.n_sites)
            ss.append(p.entropy)
        else:
            ns.append(int(p[0]))
            ss.append(float(p[1]))
    if len(ns) < 3:
        raise ValueError("fit needs at least three points")
    if len(set(ns)) < 2:
        raise ValueError("degenerate design: all points share one system size")
    if len(set(ns)) != len(ns):
        raise ValueError("fit needs distinct system sizes")
    x = np.log(np.asarray(ns, dtype=float) / math.pi)
    y = np.asarray(ss, dtype=float)
    design = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ np.array([slope, intercept])
    return CentralChargeFit(
        c=float(3.0 * slope),
        s0=float(intercept),
        residual_rms=float(np.sqrt(np.mean(resid**2))),
        points_used=points,
    )


def write_entropy_csv(points: Iterable[EntropyPoint], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for p in points:
            writer.writerow(p.csv_row())


def read_entropy_csv(path) -> list[EntropyPoint]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"{path}: header {reader.fieldnames} does not match {CSV_COLUMNS}")
        return [
            EntropyPoint(
                n_sites=int(row["n_sites"]),
                beta=float(row["beta"]),
                l_max=HalfInt.from_twice(int(row["l_max_x2"])),
                method=row["method"],
                entropy=float(row["entropy"]),
                energy=float(row["energy"]),
                seed=int(row["seed"]),
            )
            for row in reader
        ]


def fit_to_dict(fit: CentralChargeFit) -> dict:
    return json.loads(fit.to_text())


__all__ = [
    "CSV_COLUMNS",
    "CentralChargeFit",
    "EntropyPoint",
    "energy_density",
    "fit_central_charge",
    "half_chain_entropy",
    "read_entropy_csv",
    "reduced_density_matrix",
    "von_neumann_entropy",
    "write_entropy_csv",
]
