"""Experiment configuration, orchestration and persistence.

Configs are JSON objects. Single-shot modes (``ham``, ``ed``, ``vqe``,
``dmrg``) need a ``hamiltonian`` section; scan modes (``entropy-scan``,
``ccharge-scan``, ``grad-scan``) take a ``scan`` section whose lists are
crossed into cells. Each cell writes one run record under ``records/`` and is
logged in ``manifest.json`` so an interrupted scan can be resumed. Aggregate
CSVs are rebuilt from the records in sorted cell order, so they depend only on
the config and the master seed.

Defaults
--------
============  ======  ======
key           full    ci
============  ======  ======
restarts      100     10
n_inits       100     25
VQE max N     10      8
============  ======  ======

Optimizer and DMRG defaults are those of :class:`~sigma_gap.vqe.OptimizerConfig`
(lr 0.1, 2000 epochs) and :class:`~sigma_gap.tensornet.DmrgConfig` (cutoff 1e-10).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import logging
import math
import os
import struct
import sys
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .circuit import ANSATZ_KINDS, AnsatzSpec, apply
from .halfint import HALF, HalfInt
from .model import HamiltonianSpec, build_dense_hamiltonian, chain_dimension, exact_ground_state, write_triplets
from .observables import (
    EntropyPoint,
    energy_density,
    fit_central_charge,
    half_chain_entropy,
    write_entropy_csv,
)
from .pauli import pauli_decompose
from .tensornet import DmrgConfig, build_mpo, dmrg_ground_state, write_mps
from .vqe import OptimizerConfig, derive_seed, ensemble, gradient_variance_scan

log = logging.getLogger(__name__)

__version__ = "0.1.0"

MODES = ("ham", "ed", "vqe", "dmrg", "entropy-scan", "ccharge-scan", "grad-scan")
SCAN_MODES = ("entropy-scan", "ccharge-scan", "grad-scan")
METHODS = ("ED", "DMRG") + tuple(f"VQE-{k}" for k in ANSATZ_KINDS)
PROFILES = {
    "full": {"restarts": 100, "n_inits": 100, "vqe_max_sites": 10},
    "ci": {"restarts": 10, "n_inits": 25, "vqe_max_sites": 8},
}
# layer depths per ansatz and site count used for the published parameter counts
DEFAULT_LAYERS = {
    "S2D": {4: 5, 6: 10, 8: 39, 10: 50},
    "QMPS": {4: 3, 6: 8, 8: 21, 10: 28},
    "QMPS_BLOCK": {4: 3, 6: 8, 8: 21, 10: 28},
}
DEGENERACY_TOL = 1e-10

CCHARGE_COLUMNS = ("beta", "l_max_x2", "method", "c", "s0", "residual_rms", "n_points", "seed")
GRADIENT_COLUMNS = ("n_sites", "ansatz", "layers", "n_params", "n_inits", "grad_std", "method", "seed")

TOP_KEYS = {
    "mode", "hamiltonian", "ansatz", "optimizer", "dmrg", "scan", "restarts",
    "n_inits", "output_dir", "master_seed", "profile", "workers",
}
SCAN_KEYS = {"n_sites", "betas", "l_max", "methods", "boundary", "ansatz", "layers"}


def log_beta_grid(n: int = 8, lo: float = 0.1, hi: float = 10.0) -> list[float]:
    return [float(b) for b in np.logspace(math.log10(lo), math.log10(hi), n)]


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the offending field."""


@dataclass
class ScanSpec:
    n_sites: list[int] = field(default_factory=lambda: [4, 6, 8, 10])
    betas: list[float] = field(default_factory=lambda: [0.1, 10.0])
    l_max: list[HalfInt] = field(default_factory=lambda: [HALF])
    methods: list[str] = field(default_factory=lambda: ["ED"])
    boundary: str = "periodic"
    ansatz: str = "S2D"
    layers: dict[int, int] = field(default_factory=dict)


@dataclass
class ExperimentConfig:
    mode: str
    hamiltonian: HamiltonianSpec | None = None
    ansatz: AnsatzSpec | None = None
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    dmrg: DmrgConfig = field(default_factory=DmrgConfig)
    scan: ScanSpec | None = None
    restarts: int = 100
    n_inits: int = 100
    output_dir: str = "runs"
    master_seed: int = 0
    profile: str = "full"
    workers: int | None = None

    def to_dict(self) -> dict:
        """JSON-ready echo; parsing it back gives an equal config."""
        out: dict[str, Any] = {"mode": self.mode}
        if self.hamiltonian is not None:
            h = self.hamiltonian
            out["hamiltonian"] = {
                "n_sites": h.n_sites, "beta": h.beta, "l_max": str(HalfInt(h.l_max)), "boundary": h.boundary,
            }
        if self.ansatz is not None:
            out["ansatz"] = {"kind": self.ansatz.kind, "layers": self.ansatz.layers}
        out["optimizer"] = dataclasses.asdict(self.optimizer)
        out["dmrg"] = dataclasses.asdict(self.dmrg)
        if self.scan is not None:
            s = self.scan
            out["scan"] = {
                "n_sites": list(s.n_sites), "betas": list(s.betas), "l_max": [str(l) for l in s.l_max],
                "methods": list(s.methods), "boundary": s.boundary, "ansatz": s.ansatz,
                "layers": {str(k): v for k, v in sorted(s.layers.items())},
            }
        for key in ("restarts", "n_inits", "output_dir", "master_seed", "profile", "workers"):
            out[key] = getattr(self, key)
        return out

    def fingerprint(self) -> str:
        """Hash of everything that affects results (output location excluded)."""
        doc = self.to_dict()
        doc.pop("output_dir")
        doc.pop("workers")
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class RunRecord:
    config: dict
    payload: dict
    seeds: dict
    version: str = __version__
    started: str = ""
    finished: str = ""

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True, default=_json_default) + "\n"

    @classmethod
    def from_json(cls, text: str) -> RunRecord:
        return cls(**json.loads(text))


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, HalfInt):
        return str(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


# ---------------------------------------------------------------- parsing


def _section(raw: dict, name: str, cls, **fixed):
    body = raw.get(name, {})
    if not isinstance(body, dict):
        raise ConfigError(f"{name}: expected an object")
    allowed = {f.name for f in dataclasses.fields(cls)} - set(fixed)
    unknown = sorted(set(body) - allowed)
    if unknown:
        raise ConfigError(f"{name}: unknown key(s) {', '.join(unknown)}")
    try:
        return cls(**body, **fixed)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: {exc}") from exc


def _require_int(name: str, value, lo: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < lo:
        raise ConfigError(f"{name}: must be an integer >= {lo}, got {value!r}")
    return value


def _parse_hamiltonian(raw: dict) -> HamiltonianSpec:
    body = raw.get("hamiltonian")
    if not isinstance(body, dict):
        raise ConfigError("hamiltonian: section required for this mode")
    body = dict(body)
    for key in ("n_sites", "beta"):
        if key not in body:
            raise ConfigError(f"hamiltonian.{key}: required")
    beta = body["beta"]
    if isinstance(beta, bool) or not isinstance(beta, (int, float)) or not beta > 0 or not math.isfinite(beta):
        raise ConfigError(f"hamiltonian.beta: must be a positive number, got {beta!r}")
    _require_int("hamiltonian.n_sites", body["n_sites"], 2)
    if "l_max" in body:
        try:
            body["l_max"] = HalfInt(body["l_max"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"hamiltonian.l_max: {exc}") from exc
    body["beta"] = float(beta)
    return _section({"hamiltonian": body}, "hamiltonian", HamiltonianSpec)


def _parse_scan(raw: dict, mode: str) -> ScanSpec:
    body = raw.get("scan", {})
    if not isinstance(body, dict):
        raise ConfigError("scan: expected an object")
    unknown = sorted(set(body) - SCAN_KEYS)
    if unknown:
        raise ConfigError(f"scan: unknown key(s) {', '.join(unknown)}")
    spec = ScanSpec()
    if mode == "ccharge-scan":
        spec.betas = log_beta_grid()
        spec.methods = ["DMRG"]
    if "n_sites" in body:
        spec.n_sites = [_require_int("scan.n_sites", n, 2) for n in _as_list(body["n_sites"], "scan.n_sites")]
    if "betas" in body:
        betas = _as_list(body["betas"], "scan.betas")
        for b in betas:
            if isinstance(b, bool) or not isinstance(b, (int, float)) or not b > 0 or not math.isfinite(b):
                raise ConfigError(f"scan.betas: must be positive numbers, got {b!r}")
        spec.betas = [float(b) for b in betas]
    if "l_max" in body:
        try:
            spec.l_max = [HalfInt(v) for v in _as_list(body["l_max"], "scan.l_max")]
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"scan.l_max: {exc}") from exc
        for l in spec.l_max:
            if l.is_integer or l.twice < 1:
                raise ConfigError(f"scan.l_max: must be positive half-odd values, got {l}")
    if "methods" in body:
        methods = _as_list(body["methods"], "scan.methods")
        bad = [m for m in methods if m not in METHODS]
        if bad:
            raise ConfigError(f"scan.methods: unknown method(s) {bad}; choose from {METHODS}")
        spec.methods = list(methods)
    if "boundary" in body:
        if body["boundary"] not in ("open", "periodic"):
            raise ConfigError(f"scan.boundary: must be 'open' or 'periodic', got {body['boundary']!r}")
        spec.boundary = body["boundary"]
    if "ansatz" in body:
        if body["ansatz"] not in ANSATZ_KINDS:
            raise ConfigError(f"scan.ansatz: must be one of {ANSATZ_KINDS}")
        spec.ansatz = body["ansatz"]
    if "layers" in body:
        if not isinstance(body["layers"], dict):
            raise ConfigError("scan.layers: expected an object mapping site count to layers")
        try:
            spec.layers = {int(k): _require_int("scan.layers", v, 1) for k, v in body["layers"].items()}
        except ValueError as exc:
            raise ConfigError(f"scan.layers: {exc}") from exc
    if mode == "ccharge-scan" and len(set(spec.n_sites)) < 3:
        raise ConfigError("scan.n_sites: a central-charge fit needs at least three system sizes")
    if mode in ("entropy-scan", "ccharge-scan") and any(n % 2 for n in spec.n_sites):
        raise ConfigError("scan.n_sites: half-chain entropies need even site counts")
    return spec


def _as_list(value, name: str) -> list:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{name}: expected a non-empty list")
    return value


def layers_for(kind: str, n_sites: int, table: dict[int, int] | None = None) -> int:
    table = table or {}
    if n_sites in table:
        return table[n_sites]
    try:
        return DEFAULT_LAYERS[kind][n_sites]
    except KeyError:
        raise ConfigError(f"no layer count for {kind} at {n_sites} sites; set it explicitly") from None


def parse_config(text: str, overrides: dict | None = None) -> ExperimentConfig:
    """Parse and validate a JSON experiment config.

    ``overrides`` replaces top-level keys after parsing the text (used for
    command-line flags). Profile-dependent defaults are applied last, so
    explicit ``restarts`` or ``n_inits`` always win.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    unknown = sorted(set(raw) - TOP_KEYS)
    if unknown:
        raise ConfigError(f"unknown key(s) {', '.join(unknown)}")

    mode = raw.get("mode")
    if mode not in MODES:
        raise ConfigError(f"mode: must be one of {MODES}, got {mode!r}")
    profile = raw.get("profile", "full")
    if profile not in PROFILES:
        raise ConfigError(f"profile: must be one of {tuple(PROFILES)}, got {profile!r}")
    defaults = PROFILES[profile]

    cfg = ExperimentConfig(mode=mode, profile=profile)
    cfg.restarts = _require_int("restarts", raw.get("restarts", defaults["restarts"]), 2)
    cfg.n_inits = _require_int("n_inits", raw.get("n_inits", defaults["n_inits"]), 2)
    cfg.master_seed = _require_int("master_seed", raw.get("master_seed", 0), 0)
    if cfg.master_seed >= 2**64:
        raise ConfigError("master_seed: must fit in 64 bits")
    if raw.get("workers") is not None:
        cfg.workers = _require_int("workers", raw["workers"], 1)
    out = raw.get("output_dir", "runs")
    if not isinstance(out, str) or not out:
        raise ConfigError("output_dir: must be a non-empty path string")
    cfg.output_dir = out
    cfg.optimizer = _section(raw, "optimizer", OptimizerConfig)
    cfg.dmrg = _section(raw, "dmrg", DmrgConfig)

    if mode in SCAN_MODES:
        if "hamiltonian" in raw:
            raise ConfigError("hamiltonian: scan modes take their grid from the scan section")
        cfg.scan = _parse_scan(raw, mode)
        if mode == "grad-scan":
            for n in cfg.scan.n_sites:
                layers_for(cfg.scan.ansatz, n, cfg.scan.layers)
        if any(m.startswith("VQE-") for m in cfg.scan.methods):
            for m in cfg.scan.methods:
                if m.startswith("VQE-"):
                    for n in cfg.scan.n_sites:
                        layers_for(m[4:], n, cfg.scan.layers)
    else:
        if "scan" in raw:
            raise ConfigError(f"scan: not used by mode {mode!r}")
        cfg.hamiltonian = _parse_hamiltonian(raw)

    if mode == "vqe":
        body = raw.get("ansatz")
        if not isinstance(body, dict) or "kind" not in body:
            raise ConfigError("ansatz.kind: required for vqe")
        if HalfInt(cfg.hamiltonian.l_max) != HALF:
            raise ConfigError("hamiltonian.l_max: circuits encode one qubit per site, so vqe needs l_max = 1/2")
        body = dict(body)
        n_qubits = body.pop("n_qubits", cfg.hamiltonian.n_sites)
        if n_qubits != cfg.hamiltonian.n_sites:
            raise ConfigError("ansatz.n_qubits: must equal hamiltonian.n_sites")
        if body.get("kind") not in ANSATZ_KINDS:
            raise ConfigError(f"ansatz.kind: must be one of {ANSATZ_KINDS}, got {body.get('kind')!r}")
        if "layers" not in body:
            body["layers"] = layers_for(body["kind"], n_qubits)
        cfg.ansatz = _section({"ansatz": body}, "ansatz", AnsatzSpec, n_qubits=n_qubits)
    elif "ansatz" in raw:
        raise ConfigError(f"ansatz: not used by mode {mode!r}")
    return cfg


# ---------------------------------------------------------------- seeds and cells


def _tag(text: str) -> int:
    return zlib.crc32(text.encode())


def _beta_bits(beta: float) -> int:
    return struct.unpack("<Q", struct.pack("<d", float(beta)))[0]


def cell_seed(master: int, mode: str, n_sites: int, beta: float, l_max, method: str, restart: int = 0) -> int:
    """Seed for one cell, independent of scan order."""
    return derive_seed(master, _tag(mode), n_sites, _beta_bits(beta), HalfInt(l_max).twice, _tag(method), restart)


@dataclass(frozen=True)
class Cell:
    n_sites: int
    beta: float
    l_max_x2: int
    method: str

    @property
    def key(self) -> str:
        return f"N{self.n_sites}_beta{self.beta!r}_l{self.l_max_x2}_{self.method}"

    def sort_key(self):
        return (self.method, self.l_max_x2, self.beta, self.n_sites)


def scan_cells(cfg: ExperimentConfig) -> tuple[list[Cell], list[str]]:
    """Cells to run and human-readable notes on skipped combinations."""
    s = cfg.scan
    cap = PROFILES[cfg.profile]["vqe_max_sites"]
    cells, skipped = [], []
    if cfg.mode == "grad-scan":
        beta = s.betas[0]
        for n in s.n_sites:
            cells.append(Cell(n, beta, 1, f"VQE-{s.ansatz}"))
        return sorted(cells, key=Cell.sort_key), skipped
    for method in s.methods:
        for l in s.l_max:
            for beta in s.betas:
                for n in s.n_sites:
                    cell = Cell(n, beta, l.twice, method)
                    if method.startswith("VQE-") and l != HALF:
                        skipped.append(f"{cell.key}: circuits need l_max = 1/2")
                    elif method.startswith("VQE-") and n > cap:
                        skipped.append(f"{cell.key}: above the {cfg.profile} profile VQE limit of {cap} sites")
                    else:
                        cells.append(cell)
    return sorted(cells, key=Cell.sort_key), skipped


# ---------------------------------------------------------------- workers


def _spec(cfg: ExperimentConfig, cell: Cell) -> HamiltonianSpec:
    boundary = cfg.scan.boundary if cfg.scan is not None else cfg.hamiltonian.boundary
    return HamiltonianSpec(cell.n_sites, cell.beta, HalfInt.from_twice(cell.l_max_x2), boundary)


def _pauli_hamiltonian(spec: HamiltonianSpec):
    return pauli_decompose(build_dense_hamiltonian(spec), spec.n_sites)


def solve_ed(spec: HamiltonianSpec) -> dict:
    pairs = exact_ground_state(build_dense_hamiltonian(spec), n_states=2)
    (e0, psi), (e1, _) = pairs
    return {
        "energy": e0,
        "energy_density": energy_density(e0, spec.n_sites),
        "entropy": half_chain_entropy(psi, spec.n_sites) if spec.n_sites % 2 == 0 else None,
        "gap": e1 - e0,
        "degenerate": bool(e1 - e0 < DEGENERACY_TOL),
        "dim": chain_dimension(spec),
    }, psi


def solve_dmrg(spec: HamiltonianSpec, config: DmrgConfig, seed: int) -> tuple[dict, Any]:
    config = dataclasses.replace(config, seed=seed)
    res = dmrg_ground_state(build_mpo(spec), config)
    return {
        "energy": res.energy,
        "energy_density": energy_density(res.energy, spec.n_sites),
        "entropy": half_chain_entropy(res.mps, spec.n_sites) if spec.n_sites % 2 == 0 else None,
        "truncation_error": res.truncation_error,
        "converged": res.converged,
        "sweep_energies": res.sweep_energies,
        "max_bond_used": res.max_bond_used,
    }, res.mps


def solve_vqe(spec: HamiltonianSpec, ansatz: AnsatzSpec, optimizer: OptimizerConfig, restarts: int, seed: int):
    circuit = ansatz.build()
    H = _pauli_hamiltonian(spec)
    result = ensemble(circuit, H, dataclasses.replace(optimizer, seed=seed), restarts)
    best = result.best
    psi = apply(circuit, best.best_params)
    return {
        "energy": best.final_energy,
        "energy_density": energy_density(best.final_energy, spec.n_sites),
        "entropy": half_chain_entropy(psi, spec.n_sites) if spec.n_sites % 2 == 0 else None,
        "mean_energy": result.mean_energy,
        "std_energy": result.std_energy,
        "n_failed": result.n_failed,
        "n_params": circuit.n_params,
        "ansatz": ansatz.kind,
        "layers": ansatz.layers,
        "runs": [r.to_dict() for r in result.runs],
    }


def _run_cell(cfg_dict: dict, cell: Cell) -> dict:
    cfg = parse_config(json.dumps(cfg_dict))
    spec = _spec(cfg, cell)
    seed = cell_seed(cfg.master_seed, cfg.mode, cell.n_sites, cell.beta, spec.l_max, cell.method)
    if cfg.mode == "grad-scan":
        kind = cell.method[4:]
        layers = layers_for(kind, cell.n_sites, cfg.scan.layers)
        table = gradient_variance_scan(
            kind, [cell.n_sites], {cell.n_sites: layers}, lambda n: _pauli_hamiltonian(spec),
            cfg.n_inits, seed=seed, method=cfg.optimizer.gradient,
        )
        n_params = AnsatzSpec(kind, cell.n_sites, layers).build().n_params
        payload = {"grad_std": table[cell.n_sites], "layers": layers, "n_params": n_params,
                   "n_inits": cfg.n_inits, "ansatz": kind, "gradient": cfg.optimizer.gradient}
    elif cell.method == "ED":
        payload, _ = solve_ed(spec)
    elif cell.method == "DMRG":
        payload, _ = solve_dmrg(spec, cfg.dmrg, seed)
    else:
        kind = cell.method[4:]
        ansatz = AnsatzSpec(kind, cell.n_sites, layers_for(kind, cell.n_sites, cfg.scan.layers))
        payload = solve_vqe(spec, ansatz, cfg.optimizer, cfg.restarts, seed)
    payload.update(dataclasses.asdict(cell))
    payload["seed"] = seed
    return payload


# ---------------------------------------------------------------- persistence


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def worker_count(cfg: ExperimentConfig) -> int:
    n = cfg.workers or os.cpu_count() or 1
    cap = os.environ.get("SIGMA_GAP_THREADS")
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise ConfigError(f"SIGMA_GAP_THREADS must be an integer, got {cap!r}") from None
    return n


class _Manifest:
    def __init__(self, root: Path, cfg: ExperimentConfig, resume: bool):
        self.path = root / "manifest.json"
        self.doc = {"mode": cfg.mode, "fingerprint": cfg.fingerprint(), "completed": [], "failed": {}}
        if resume and self.path.exists():
            old = json.loads(self.path.read_text())
            if old.get("fingerprint") != self.doc["fingerprint"]:
                raise ConfigError("cannot resume: the config differs from the one that started this run")
            self.doc["completed"] = list(old.get("completed", []))
        self.save()

    @property
    def completed(self) -> set[str]:
        return set(self.doc["completed"])

    def done(self, key: str) -> None:
        self.doc["completed"].append(key)
        self.doc["failed"].pop(key, None)
        self.save()

    def fail(self, key: str, message: str) -> None:
        self.doc["failed"][key] = message
        self.save()

    def save(self) -> None:
        _atomic_write(self.path, json.dumps(self.doc, indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, columns: Sequence[str], rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def _aggregate(cfg: ExperimentConfig, root: Path, payloads: list[dict]) -> dict:
    """Write the mode's CSVs and return a summary payload."""
    if cfg.mode == "grad-scan":
        rows = [
            {
                "n_sites": p["n_sites"], "ansatz": p["ansatz"], "layers": p["layers"], "n_params": p["n_params"],
                "n_inits": p["n_inits"], "grad_std": repr(float(p["grad_std"])), "method": p["gradient"],
                "seed": p["seed"],
            }
            for p in sorted(payloads, key=lambda p: p["n_sites"])
        ]
        _write_csv(root / "gradient.csv", GRADIENT_COLUMNS, rows)
        return {"gradient_csv": "gradient.csv", "grad_std": {str(r["n_sites"]): float(r["grad_std"]) for r in rows}}

    points = [
        EntropyPoint(
            n_sites=p["n_sites"], beta=p["beta"], l_max=HalfInt.from_twice(p["l_max_x2"]), method=p["method"],
            entropy=p["entropy"], energy=p["energy"], seed=p["seed"],
        )
        for p in payloads
    ]
    points.sort(key=lambda q: (q.method, q.l_max.twice, q.beta, q.n_sites))
    write_entropy_csv(points, root / "entropy.csv")
    summary: dict[str, Any] = {"entropy_csv": "entropy.csv", "n_points": len(points)}
    if cfg.mode == "ccharge-scan":
        groups: dict[tuple, list[EntropyPoint]] = {}
        for q in points:
            groups.setdefault((q.beta, q.l_max.twice, q.method), []).append(q)
        rows = []
        for (beta, lx2, method), pts in sorted(groups.items(), key=lambda kv: (kv[0][2], kv[0][1], kv[0][0])):
            if len({q.n_sites for q in pts}) < 3:
                log.warning("skipping fit at beta=%s l_max_x2=%s %s: fewer than three sizes", beta, lx2, method)
                continue
            fit = fit_central_charge(pts)
            rows.append({
                "beta": repr(beta), "l_max_x2": lx2, "method": method, "c": repr(fit.c), "s0": repr(fit.s0),
                "residual_rms": repr(fit.residual_rms), "n_points": len(pts), "seed": cfg.master_seed,
            })
        _write_csv(root / "ccharge.csv", CCHARGE_COLUMNS, rows)
        summary["ccharge_csv"] = "ccharge.csv"
        summary["fits"] = [{k: r[k] for k in ("beta", "l_max_x2", "method", "c", "s0")} for r in rows]
    return summary


def _run_scan(cfg: ExperimentConfig, root: Path, resume: bool) -> tuple[dict, bool]:
    records = root / "records"
    records.mkdir(parents=True, exist_ok=True)
    manifest = _Manifest(root, cfg, resume)
    cells, skipped = scan_cells(cfg)
    for note in skipped:
        log.info("skipped %s", note)
    todo = [c for c in cells if c.key not in manifest.completed]
    log.info("%d cells, %d already complete", len(cells), len(cells) - len(todo))
    cfg_dict = cfg.to_dict()
    workers = min(worker_count(cfg), max(1, len(todo)))
    ok = True

    def finish(cell: Cell, payload: dict | None, error: Exception | None, started: str):
        nonlocal ok
        if error is not None:
            ok = False
            log.error("cell %s failed: %s", cell.key, error)
            manifest.fail(cell.key, f"{type(error).__name__}: {error}")
            return
        rec = RunRecord(cfg_dict, payload, {"master_seed": cfg.master_seed, "cell_seed": payload["seed"]},
                        started=started, finished=_now())
        _atomic_write(records / f"{cell.key}.json", rec.to_json())
        manifest.done(cell.key)
        log.info("cell %s done", cell.key)

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            started = _now()
            futures = [(c, pool.submit(_run_cell, cfg_dict, c)) for c in todo]
            # single writer: results are persisted here, in submission order
            for cell, fut in futures:
                try:
                    finish(cell, fut.result(), None, started)
                except Exception as exc:  # noqa: BLE001 - any module error fails the cell
                    finish(cell, None, exc, started)
    else:
        for cell in todo:
            started = _now()
            try:
                finish(cell, _run_cell(cfg_dict, cell), None, started)
            except Exception as exc:  # noqa: BLE001
                finish(cell, None, exc, started)

    done = manifest.completed
    payloads = [
        json.loads((records / f"{c.key}.json").read_text())["payload"] for c in cells if c.key in done
    ]
    summary = _aggregate(cfg, root, payloads) if payloads else {}
    summary.update({"cells": len(cells), "completed": len(done & {c.key for c in cells}), "skipped": skipped})
    return summary, ok


def _run_single(cfg: ExperimentConfig, root: Path) -> tuple[dict, dict]:
    spec = cfg.hamiltonian
    seed = cell_seed(cfg.master_seed, cfg.mode, spec.n_sites, spec.beta, spec.l_max, cfg.mode)
    seeds = {"master_seed": cfg.master_seed, "cell_seed": seed}
    if cfg.mode == "ham":
        op = build_dense_hamiltonian(spec)
        write_triplets(op, root / "hamiltonian.txt")
        payload = {"dim": op.dim, "hamiltonian_file": "hamiltonian.txt"}
        if HalfInt(spec.l_max) == HALF and spec.n_sites <= 12:
            ph = pauli_decompose(op, spec.n_sites)
            (root / "pauli.txt").write_text(ph.to_text())
            payload.update({"pauli_terms": len(ph), "pauli_file": "pauli.txt"})
        return payload, seeds
    if cfg.mode == "ed":
        payload, _ = solve_ed(spec)
        return payload, seeds
    if cfg.mode == "dmrg":
        payload, mps = solve_dmrg(spec, cfg.dmrg, seed)
        write_mps(mps, root / "mps.txt")
        payload["mps_file"] = "mps.txt"
        return payload, seeds
    payload = solve_vqe(spec, cfg.ansatz, cfg.optimizer, cfg.restarts, seed)
    return payload, seeds


def run_experiment(cfg: ExperimentConfig, *, resume: bool = False) -> tuple[RunRecord, int]:
    """Run ``cfg`` and persist its outputs; returns the summary record and an exit code."""
    root = Path(cfg.output_dir)
    root.mkdir(parents=True, exist_ok=True)
    started = _now()
    t0 = time.perf_counter()
    if cfg.mode in SCAN_MODES:
        payload, ok = _run_scan(cfg, root, resume)
        seeds = {"master_seed": cfg.master_seed}
    else:
        payload, seeds = _run_single(cfg, root)
        ok = True
    payload["wall_seconds"] = time.perf_counter() - t0
    record = RunRecord(cfg.to_dict(), payload, seeds, started=started, finished=_now())
    _atomic_write(root / "record.json", record.to_json())
    return record, 0 if ok else 1


# ---------------------------------------------------------------- plots

PLOT_KINDS = ("energy", "entropy", "ccharge", "gradient")


def _read_csv(path: Path, columns: Sequence[str]) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != tuple(columns):
            raise ValueError(f"{path}: header {reader.fieldnames} does not match {list(columns)}")
        rows = list(reader)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return rows


def emit_plot(csv_path, plot_kind: str, out_path=None, *, reference_c: float = 1.0) -> Path:
    """Render a CSV from a scan as SVG; identical inputs give identical bytes."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    from .observables import CSV_COLUMNS

    if plot_kind not in PLOT_KINDS:
        raise ValueError(f"plot kind must be one of {PLOT_KINDS}")
    csv_path = Path(csv_path)
    columns = {"energy": CSV_COLUMNS, "entropy": CSV_COLUMNS,
               "ccharge": CCHARGE_COLUMNS, "gradient": GRADIENT_COLUMNS}[plot_kind]
    rows = _read_csv(csv_path, columns)
    out_path = Path(out_path) if out_path else csv_path.with_name(f"{csv_path.stem}_{plot_kind}.svg")

    with matplotlib.rc_context({"svg.hashsalt": "sigma-gap", "svg.fonttype": "path"}):
        fig, ax = plt.subplots(figsize=(5, 3.6))
        if plot_kind in ("energy", "entropy"):
            col = "energy_density" if plot_kind == "energy" else "entropy"
            series: dict[tuple, list] = {}
            for r in rows:
                series.setdefault((r["method"], r["beta"], r["l_max_x2"]), []).append(
                    (int(r["n_sites"]), float(r[col])))
            for (method, beta, lx2), pts in sorted(series.items()):
                pts.sort()
                ax.plot(*zip(*pts), "o-", label=f"{method} beta={float(beta):g} l_max={int(lx2)}/2")
                if plot_kind == "entropy" and len(pts) >= 2:
                    ns = np.array([p[0] for p in pts], dtype=float)
                    x = np.log(ns / math.pi)
                    s0 = float(np.mean(np.array([p[1] for p in pts]) - reference_c / 3 * x))
                    grid = np.linspace(ns.min(), ns.max(), 50)
                    ax.plot(grid, reference_c / 3 * np.log(grid / math.pi) + s0, "--", color="gray", lw=1)
            ax.set_xlabel("sites N")
            ax.set_ylabel("E / N" if plot_kind == "energy" else "half-chain entropy")
        elif plot_kind == "ccharge":
            series = {}
            for r in rows:
                series.setdefault((r["method"], r["l_max_x2"]), []).append((float(r["beta"]), float(r["c"])))
            for (method, lx2), pts in sorted(series.items()):
                pts.sort()
                ax.plot(*zip(*pts), "o-", label=f"{method} l_max={int(lx2)}/2")
            ax.set_xscale("log")
            ax.set_xlabel("beta")
            ax.set_ylabel("fitted c")
        else:
            pts = sorted((int(r["n_sites"]), float(r["grad_std"])) for r in rows)
            ax.plot(*zip(*pts), "o-", label=rows[0]["ansatz"])
            ax.set_yscale("log")
            ax.set_xlabel("sites N")
            ax.set_ylabel("mean gradient std")
        ax.legend(fontsize=7)
        fig.tight_layout()
        fig.savefig(out_path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return out_path


# ---------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sigma-gap", description="Ground-state studies of the truncated sigma model chain.")
    p.add_argument("mode", choices=MODES)
    p.add_argument("--config", required=True, help="JSON experiment config")
    p.add_argument("--resume", action="store_true", help="skip cells already listed in the manifest")
    p.add_argument("--output-dir", help="overrides output_dir from the config")
    p.add_argument("--seed", type=int, help="overrides master_seed from the config")
    p.add_argument("--profile", choices=tuple(PROFILES), help="overrides profile from the config")
    p.add_argument("--plot", action="store_true", help="also render SVG plots of the scan CSVs")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        text = Path(args.config).read_text(encoding="utf-8")
        try:
            raw = json.loads(text)
        except json.JSONDecodeError:
            raw = None  # parse_config reports the position
        raw_mode = raw.get("mode") if isinstance(raw, dict) else None
        if raw_mode is not None and raw_mode != args.mode:
            raise ConfigError(f"mode: config says {raw_mode!r} but {args.mode!r} was requested")
        cfg = parse_config(text, {"mode": args.mode, "output_dir": args.output_dir,
                                  "master_seed": args.seed, "profile": args.profile})
    except (OSError, ConfigError) as exc:
        print(f"sigma-gap: {exc}", file=sys.stderr)
        return 2
    try:
        record, code = run_experiment(cfg, resume=args.resume)
    except Exception as exc:  # noqa: BLE001 - report and exit nonzero
        log.exception("run failed")
        print(f"sigma-gap: {exc}", file=sys.stderr)
        return 1
    root = Path(cfg.output_dir)
    if args.plot and cfg.mode in SCAN_MODES:
        kinds = {"entropy-scan": [("entropy.csv", "energy"), ("entropy.csv", "entropy")],
                 "ccharge-scan": [("entropy.csv", "entropy"), ("ccharge.csv", "ccharge")],
                 "grad-scan": [("gradient.csv", "gradient")]}[cfg.mode]
        for name, kind in kinds:
            if (root / name).exists():
                emit_plot(root / name, kind)
    print(json.dumps({k: v for k, v in record.payload.items() if k != "runs"}, default=_json_default, sort_keys=True))
    return code


if __name__ == "__main__":
    sys.exit(main())
