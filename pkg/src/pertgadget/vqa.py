"""Statevector simulation of layered variational circuits.

Each layer applies a Pauli rotation ``exp(-i theta A / 2)`` on every qubit and
then controlled-Z gates along a chain.  States are simulated in batches of
shape ``(B, 2**n)`` so that parameter-shift evaluations and independent
samples share the same gate loop.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .gadgets import GadgetModel
from .linalg import DimensionError, to_operator
from .pauli import PauliSum

AXES = ("X", "Y", "Z")
_PAULI = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
_AXIS_INDEX = {a: i for i, a in enumerate(AXES)}
_PAULI_STACK = np.stack([_PAULI[a] for a in AXES])


@dataclass(frozen=True)
class Ansatz:
    """Hardware-efficient layered circuit.

    ``axes[l][p]`` is the rotation axis at chain position ``p`` of layer
    ``l``; position ``p`` holds logical qubit ``inverse(qubit_order)[p]``.
    Parameter ``l * n + p`` drives that rotation.
    """

    n_qubits: int
    layers: int
    axes: tuple[tuple[str, ...], ...]
    qubit_order: tuple[int, ...]
    seed: int | None = None

    @property
    def n_params(self) -> int:
        return self.layers * self.n_qubits

    @property
    def chain(self) -> tuple[int, ...]:
        """Logical qubit at each chain position."""
        inv = [0] * self.n_qubits
        for logical, pos in enumerate(self.qubit_order):
            inv[pos] = logical
        return tuple(inv)

    def axis_indices(self) -> np.ndarray:
        return np.array([[_AXIS_INDEX[a] for a in row] for row in self.axes], dtype=np.int8)

    def to_json(self) -> dict:
        return {"n_qubits": self.n_qubits, "layers": self.layers,
                "axes": ["".join(row) for row in self.axes],
                "qubit_order": list(self.qubit_order), "seed": self.seed}

    @classmethod
    def from_json(cls, data: dict) -> "Ansatz":
        return cls(int(data["n_qubits"]), int(data["layers"]),
                   tuple(tuple(row) for row in data["axes"]),
                   tuple(int(q) for q in data["qubit_order"]), data.get("seed"))


def build_ansatz(n: int, layers: int, seed: int, order: Sequence[int] | None = None) -> Ansatz:
    if n < 1 or layers < 1:
        raise ValueError("n and layers must be positive")
    order = tuple(range(n)) if order is None else tuple(int(q) for q in order)
    if sorted(order) != list(range(n)):
        raise ValueError(f"qubit_order {order} is not a permutation of range({n})")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, 3, size=(layers, n))
    axes = tuple(tuple(AXES[i] for i in row) for row in idx)
    return Ansatz(n, layers, axes, order, seed)


# --------------------------------------------------------------------------
# simulation

def _cz_chain_signs(n: int, chain: Sequence[int]) -> np.ndarray:
    basis = np.arange(1 << n)
    bits = [(basis >> (n - 1 - q)) & 1 for q in range(n)]
    parity = np.zeros(1 << n, dtype=np.int64)
    for a, b in zip(chain, chain[1:]):
        parity ^= bits[a] & bits[b]
    return 1.0 - 2.0 * parity


def simulate(n: int, chain: Sequence[int], axes: np.ndarray, params: np.ndarray) -> np.ndarray:
    """Final states for a batch.

    ``axes``: int array ``(B, L, n)`` or ``(L, n)`` of indices into ``XYZ``;
    ``params``: ``(B, L, n)``.  Returns ``(B, 2**n)``.
    """
    params = np.asarray(params, dtype=float)
    batch, layers, width = params.shape
    if width != n:
        raise DimensionError(f"params have {width} qubits per layer, ansatz has {n}")
    axes = np.broadcast_to(axes, params.shape)
    state = np.zeros((batch, 1 << n), dtype=complex)
    state[:, 0] = 1.0
    signs = _cz_chain_signs(n, chain) if n > 1 else None
    eye = np.eye(2, dtype=complex)
    for layer in range(layers):
        for pos in range(n):
            q = chain[pos]
            theta = params[:, layer, pos]
            gates = (np.cos(theta / 2)[:, None, None] * eye
                     - 1j * np.sin(theta / 2)[:, None, None] * _PAULI_STACK[axes[:, layer, pos]])
            view = state.reshape(batch, 1 << q, 2, -1)
            v0, v1 = view[:, :, 0, :], view[:, :, 1, :]
            g = gates[:, :, :, None, None]
            new = np.empty_like(view)
            new[:, :, 0, :] = g[:, 0, 0] * v0 + g[:, 0, 1] * v1
            new[:, :, 1, :] = g[:, 1, 0] * v0 + g[:, 1, 1] * v1
            state = new.reshape(batch, -1)
        if signs is not None:
            state = state * signs
    return state


def _check(a: Ansatz, params: np.ndarray, h: PauliSum) -> np.ndarray:
    params = np.asarray(params, dtype=float)
    if params.shape[-1] != a.n_params:
        raise DimensionError(f"expected {a.n_params} parameters, got {params.shape[-1]}")
    if h.n_qubits > a.n_qubits:
        raise DimensionError(f"Hamiltonian acts on {h.n_qubits} qubits, ansatz has {a.n_qubits}")
    return params


def _expectations(mat, states: np.ndarray) -> np.ndarray:
    hs = (mat @ states.T).T
    return np.real(np.einsum("bi,bi->b", states.conj(), hs))


def _hmatrix(h: PauliSum, n: int):
    return to_operator(h, n, dense=False).matrix


def evaluate_batch(a: Ansatz, params: np.ndarray, h: PauliSum, mat=None) -> np.ndarray:
    params = _check(a, np.atleast_2d(params), h)
    mat = _hmatrix(h, a.n_qubits) if mat is None else mat
    p = params.reshape(-1, a.layers, a.n_qubits)
    states = simulate(a.n_qubits, a.chain, a.axis_indices(), p)
    return _expectations(mat, states)


def evaluate_cost(a: Ansatz, params: Sequence[float], h: PauliSum) -> float:
    """``<0...0| U^dag H U |0...0>``."""
    params = np.asarray(params, dtype=float)
    if params.ndim != 1:
        raise DimensionError("params must be a vector")
    return float(evaluate_batch(a, params, h)[0])


def _shift_batch(params: np.ndarray, include_center: bool) -> np.ndarray:
    P = len(params)
    shifts = np.eye(P) * (np.pi / 2)
    rows = [params + shifts, params - shifts]
    if include_center:
        rows.insert(0, params[None, :])
    return np.concatenate(rows)


def gradient(a: Ansatz, params: Sequence[float], h: PauliSum, mat=None) -> np.ndarray:
    """Parameter-shift gradient ``(C(theta + pi/2 e) - C(theta - pi/2 e)) / 2``."""
    params = np.asarray(params, dtype=float)
    vals = evaluate_batch(a, _shift_batch(params, False), h, mat)
    P = len(params)
    return 0.5 * (vals[:P] - vals[P:])


def cost_and_gradient(a: Ansatz, params: np.ndarray, h: PauliSum, mat=None) -> tuple[float, np.ndarray]:
    vals = evaluate_batch(a, _shift_batch(params, True), h, mat)
    P = len(params)
    return float(vals[0]), 0.5 * (vals[1:P + 1] - vals[P + 1:])


# --------------------------------------------------------------------------
# gradient variance

@dataclass
class VarianceSummary:
    n_qubits: int
    layers: int
    samples: int
    seed: int
    selector: tuple[int, int]
    mean: float
    variance: float
    mean_stderr: float
    variance_stderr: float
    values: np.ndarray = field(repr=False)

    def to_json(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if k != "values"}
        out["selector"] = list(self.selector)
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["sample", "derivative"])
        for i, v in enumerate(self.values):
            w.writerow([i, repr(float(v))])
        return buf.getvalue()


def gradient_variance(h: PauliSum, n: int, layers: int, samples: int, seed: int,
                      selector: tuple[int, int] | None = None,
                      order: Sequence[int] | None = None, batch: int = 64) -> VarianceSummary:
    """Sample variance of one partial derivative over random circuits.

    Every sample draws fresh rotation axes and uniform ``[0, 2 pi)`` angles.
    ``selector = (layer, position)`` defaults to the last qubit of the first
    layer.
    """
    if samples < 2:
        raise ValueError("samples must be at least 2")
    if h.n_qubits > n:
        raise DimensionError(f"Hamiltonian acts on {h.n_qubits} qubits, circuit has {n}")
    selector = (0, n - 1) if selector is None else (int(selector[0]), int(selector[1]))
    if not (0 <= selector[0] < layers and 0 <= selector[1] < n):
        raise ValueError(f"selector {selector} outside the parameter grid")
    order = tuple(range(n)) if order is None else tuple(order)
    chain = Ansatz(n, layers, (), order).chain
    rng = np.random.default_rng(seed)
    axes = rng.integers(0, 3, size=(samples, layers, n)).astype(np.int8)
    params = rng.uniform(0.0, 2 * np.pi, size=(samples, layers, n))
    mat = _hmatrix(h, n)
    values = np.empty(samples)
    for start in range(0, samples, batch):
        stop = min(start + batch, samples)
        ax = np.concatenate([axes[start:stop]] * 2)
        p = np.concatenate([params[start:stop]] * 2)
        m = stop - start
        p[:m, selector[0], selector[1]] += np.pi / 2
        p[m:, selector[0], selector[1]] -= np.pi / 2
        vals = _expectations(mat, simulate(n, chain, ax, p))
        values[start:stop] = 0.5 * (vals[:m] - vals[m:])
    var = float(np.var(values, ddof=1))
    return VarianceSummary(
        n, layers, samples, seed, selector,
        mean=float(np.mean(values)),
        variance=var,
        mean_stderr=float(np.std(values, ddof=1) / math.sqrt(samples)),
        variance_stderr=var * math.sqrt(2.0 / (samples - 1)),
        values=values,
    )


# --------------------------------------------------------------------------
# training

@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    iterations: int = 300
    lam: float = 0.1
    seed: int = 0

    def to_json(self) -> dict:
        return {"learning_rate": self.learning_rate, "iterations": self.iterations,
                "lambda": self.lam, "seed": self.seed}

    @classmethod
    def from_json(cls, data: dict) -> "TrainConfig":
        return cls(float(data.get("learning_rate", 0.05)), int(data.get("iterations", 300)),
                   float(data["lambda"]), int(data["seed"]))


@dataclass
class Trajectory:
    config: TrainConfig
    theta_hash: list[str]
    c_gad: list[float]
    c_target: list[float]
    grad_norm: list[float]
    final_params: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return len(self.c_gad)

    @property
    def final_target(self) -> float:
        return self.c_target[-1]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", "theta_hash", "c_gad", "c_target", "grad_norm"])
        for i, row in enumerate(zip(self.theta_hash, self.c_gad, self.c_target, self.grad_norm)):
            w.writerow([i, row[0], repr(row[1]), repr(row[2]), repr(row[3])])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {"config": self.config.to_json(), "iterations": len(self) - 1,
                "final_c_gad": self.c_gad[-1], "final_c_target": self.c_target[-1],
                "final_params": self.final_params.tolist()}


def _hash(params: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(params, dtype=np.float64).tobytes()).hexdigest()[:16]


def train(g: GadgetModel, a: Ansatz, config: TrainConfig) -> Trajectory:
    """Gradient descent on the gadget cost, monitoring the target cost.

    The trajectory has ``iterations + 1`` rows: the initial point and the
    point after each update.
    """
    if config.lam <= 0:
        raise ValueError("lambda must be positive")
    if config.iterations < 1:
        raise ValueError("iterations must be at least 1")
    n = g.total_qubits
    if a.n_qubits != n:
        raise DimensionError(f"ansatz has {a.n_qubits} qubits, gadget has {n}")
    h_gad = _hmatrix(g.hamiltonian(config.lam), n)
    h_tgt = _hmatrix(g.target_embedded(), n)
    chain, axes = a.chain, a.axis_indices()
    rng = np.random.default_rng(config.seed)
    theta = rng.uniform(0.0, 2 * np.pi, size=a.n_params)
    P = a.n_params
    hashes, c_gad, c_tgt, norms = [], [], [], []
    for it in range(config.iterations + 1):
        batch = _shift_batch(theta, True).reshape(-1, a.layers, n)
        states = simulate(n, chain, axes, batch)
        vals = _expectations(h_gad, states)
        grad = 0.5 * (vals[1:P + 1] - vals[P + 1:])
        hashes.append(_hash(theta))
        c_gad.append(float(vals[0]))
        c_tgt.append(float(_expectations(h_tgt, states[:1])[0]) + g.shift)
        norms.append(float(np.linalg.norm(grad)))
        if it < config.iterations:
            theta = theta - config.learning_rate * grad
    return Trajectory(config, hashes, c_gad, c_tgt, norms, theta)


def _train_job(args):
    g_json, a_json, cfg = args
    return train(GadgetModel.from_json(g_json), Ansatz.from_json(a_json), cfg)


def train_many(g: GadgetModel, ansatze: Sequence[Ansatz], configs: Sequence[TrainConfig],
               jobs: int = 1) -> list[Trajectory]:
    """Independent runs, optionally in worker processes; output in input order."""
    if len(ansatze) != len(configs):
        raise ValueError("one ansatz per config")
    if jobs <= 1:
        return [train(g, a, c) for a, c in zip(ansatze, configs)]
    payload = [(g.to_json(), a.to_json(), c) for a, c in zip(ansatze, configs)]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_train_job, payload))


def summary_json(trajectories: Sequence[Trajectory]) -> str:
    finals = [t.final_target for t in trajectories]
    return json.dumps({
        "runs": [{"seed": t.config.seed, "final_c_target": t.final_target,
                  "final_c_gad": t.c_gad[-1]} for t in trajectories],
        "median_final_c_target": float(np.median(finals)) if finals else None,
    }, indent=2)
