"""Operators built from Pauli sums, low-lying spectra, partial traces.

Qubit 0 is the leftmost tensor factor, i.e. the most significant bit of a
computational-basis index.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .pauli import PauliSum

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Tolerances:
    """Every numerical threshold used by the package."""

    residual: float = 1e-9  # relative to ||H||
    orthonormal: float = 1e-10
    trace: float = 1e-10
    psd: float = 1e-10
    imag: float = 1e-10
    degeneracy: float = 1e-9  # relative to max(1, ||H||)
    gap: float = 1e-9
    coefficient: float = 1e-12
    dense_max_qubits: int = 10
    sparse_max_qubits: int = 26
    eig_maxiter: int = 20000


TOL = Tolerances()


class DimensionError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class Operator:
    """Matrix of a Pauli sum, dense ndarray or CSR."""

    matrix: np.ndarray | sp.csr_matrix
    n_qubits: int
    hermitian: bool = True

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.matrix)

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray() if self.is_sparse else np.asarray(self.matrix)

    def __matmul__(self, other):
        return self.matrix @ other


@dataclass
class Spectrum:
    values: np.ndarray
    vectors: np.ndarray  # columns
    gap_above: float | None = None
    split_reliable: bool = True

    def __len__(self) -> int:
        return len(self.values)

    def to_json(self) -> dict:
        return {
            "values": self.values.tolist(),
            "vectors": complex_to_json(self.vectors),
            "gap_above": self.gap_above,
            "split_reliable": self.split_reliable,
        }


def complex_to_json(a: np.ndarray) -> list:
    a = np.asarray(a)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def complex_from_json(data) -> np.ndarray:
    a = np.asarray(data, dtype=float)
    return a[..., 0] + 1j * a[..., 1]


# --------------------------------------------------------------------------
# construction

def _masks(string, n: int) -> tuple[int, int, int]:
    x = z = ny = 0
    for q, a in string.ops:
        bit = 1 << (n - 1 - q)
        if a in ("X", "Y"):
            x |= bit
        if a in ("Z", "Y"):
            z |= bit
        if a == "Y":
            ny += 1
    return x, z, ny


def _popcount_parity(values: np.ndarray) -> np.ndarray:
    v = values.copy()
    parity = np.zeros_like(v)
    while np.any(v):
        parity ^= v & 1
        v >>= 1
    return parity


def to_operator(h: PauliSum, n_qubits: int | None = None, dense: bool | None = None,
                tol: Tolerances = TOL) -> Operator:
    """Matrix of ``h`` on ``n_qubits`` (default ``h.n_qubits``).

    Dense storage is used up to ``tol.dense_max_qubits`` unless ``dense`` is
    given explicitly.
    """
    n = h.n_qubits if n_qubits is None else n_qubits
    if n < h.n_qubits:
        raise DimensionError(f"PauliSum needs {h.n_qubits} qubits, got {n}")
    if n > tol.sparse_max_qubits:
        raise DimensionError(f"{n} qubits exceeds the cap of {tol.sparse_max_qubits}")
    if dense is None:
        dense = n <= tol.dense_max_qubits
    dim = 1 << n
    basis = np.arange(dim, dtype=np.int64)
    rows, cols, vals = [], [], []
    for coeff, string in h.terms:
        x, z, ny = _masks(string, n)
        sign = 1.0 - 2.0 * _popcount_parity(basis & z) if z else np.ones(dim)
        rows.append(basis ^ x)
        cols.append(basis)
        vals.append(coeff * (1j ** ny) * sign)
    if rows:
        mat = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(dim, dim), dtype=complex,
        )
        mat.sum_duplicates()
    else:
        mat = sp.csr_matrix((dim, dim), dtype=complex)
    if dense:
        return Operator(mat.toarray(), n)
    return Operator(mat, n)


def pauli_matrix(label: str) -> np.ndarray:
    """Dense Kronecker product for a label like ``"XIZ"`` (oracle helper)."""
    single = {
        "I": np.eye(2, dtype=complex),
        "X": np.array([[0, 1], [1, 0]], dtype=complex),
        "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
        "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    }
    out = np.ones((1, 1), dtype=complex)
    for ch in label:
        out = np.kron(out, single[ch])
    return out


# --------------------------------------------------------------------------
# spectra

def _as_matrix(op) -> np.ndarray | sp.spmatrix:
    return op.matrix if isinstance(op, Operator) else op


def lowest_eigenpairs(op: Operator | np.ndarray, d: int, tol: Tolerances = TOL) -> Spectrum:
    """The ``d`` lowest eigenpairs, ascending.

    ``gap_above`` is ``E_d - E_{d-1}`` when a further level was computed;
    ``split_reliable`` is False when that gap is below the degeneracy
    tolerance, i.e. the tracked subspace boundary cuts through a multiplet.
    """
    mat = _as_matrix(op)
    dim = mat.shape[0]
    if not 1 <= d <= dim:
        raise ValueError(f"d must lie in [1, {dim}], got {d}")
    n_qubits = int(round(np.log2(dim)))
    if not sp.issparse(mat) or n_qubits <= tol.dense_max_qubits or d + 1 >= dim - 1:
        dense = mat.toarray() if sp.issparse(mat) else np.asarray(mat)
        vals, vecs = np.linalg.eigh(dense)
        take = min(d + 1, dim)
        vals, vecs = vals[:take], vecs[:, :take]
    else:
        k = d + 1
        try:
            vals, vecs = spla.eigsh(mat, k=k, which="SA", ncv=min(dim - 1, max(2 * k + 1, 20)),
                                    tol=1e-13, maxiter=tol.eig_maxiter)
        except spla.ArpackNoConvergence as exc:
            raise ConvergenceError(f"Krylov solver did not converge for d={d}") from exc
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
        # full reorthogonalization of the returned block
        vecs, _ = np.linalg.qr(vecs)
        vals = np.real(np.einsum("ij,ij->j", vecs.conj(), mat @ vecs))
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
    scale = max(1.0, float(np.max(np.abs(vals))) if len(vals) else 1.0)
    gap = float(vals[d] - vals[d - 1]) if len(vals) > d else None
    reliable = gap is None or gap > tol.degeneracy * scale
    res = mat @ vecs[:, :d] - vecs[:, :d] * vals[:d]
    worst = float(np.max(np.linalg.norm(res, axis=0))) if d else 0.0
    if worst > max(tol.residual * scale, 1e-8):
        raise ConvergenceError(f"eigenpair residual {worst:.2e} above tolerance")
    return Spectrum(np.asarray(vals[:d], dtype=float), vecs[:, :d], gap, reliable)


def ground_state(op: Operator | np.ndarray, tol: Tolerances = TOL) -> tuple[float, np.ndarray]:
    spec = lowest_eigenpairs(op, 1, tol)
    return float(spec.values[0]), spec.vectors[:, 0]


# --------------------------------------------------------------------------
# states

@dataclass
class DensityOperator:
    matrix: np.ndarray
    qubits: tuple[int, ...] = field(default=())

    def check(self, tol: Tolerances = TOL) -> None:
        tr = np.trace(self.matrix)
        if abs(tr - 1) > tol.trace * 10:
            raise ValueError(f"trace {tr} != 1")
        if np.min(np.linalg.eigvalsh(self.matrix)) < -tol.psd * 10:
            raise ValueError("not positive semidefinite")

    def to_json(self) -> dict:
        return {"qubits": list(self.qubits), "matrix": complex_to_json(self.matrix)}


def partial_trace(state: np.ndarray | DensityOperator, keep: Iterable[int],
                  n_qubits: int | None = None) -> DensityOperator:
    """Reduced density operator on ``keep`` (returned in ascending qubit order)."""
    rho_in = state.matrix if isinstance(state, DensityOperator) else np.asarray(state)
    dim = rho_in.shape[0]
    n = int(round(np.log2(dim))) if n_qubits is None else n_qubits
    keep = sorted(set(int(q) for q in keep))
    if not keep:
        raise ValueError("keep must be non-empty")
    if any(q < 0 or q >= n for q in keep):
        raise ValueError(f"keep {keep} outside register of {n} qubits")
    drop = [q for q in range(n) if q not in keep]
    dk = 1 << len(keep)
    if rho_in.ndim == 1:
        psi = rho_in.reshape((2,) * n).transpose(keep + drop).reshape(dk, -1)
        rho = psi @ psi.conj().T
    else:
        t = rho_in.reshape((2,) * (2 * n))
        t = t.transpose(keep + drop + [n + q for q in keep] + [n + q for q in drop])
        t = t.reshape(dk, dim // dk, dk, dim // dk)
        rho = np.einsum("ajbj->ab", t)
    return DensityOperator(rho, tuple(keep))


def expectation(op: Operator | np.ndarray, state: np.ndarray, tol: Tolerances = TOL) -> float:
    mat = _as_matrix(op)
    state = np.asarray(state)
    if mat.shape[1] != state.shape[0]:
        raise DimensionError(f"operator dim {mat.shape[1]} vs state dim {state.shape[0]}")
    if state.ndim == 1:
        val = np.vdot(state, mat @ state)
    else:
        val = np.trace(mat @ state)
    if abs(val.imag) > tol.imag * max(1.0, abs(val.real)):
        raise ValueError(f"expectation has imaginary part {val.imag:.3e}")
    return float(val.real)


def operator_norm(h: PauliSum, mode: str = "bound", tol: Tolerances = TOL) -> float:
    """``bound``: sum of |coefficients|; ``exact``: largest singular value."""
    if mode == "bound":
        return h.l1_norm()
    if mode != "exact":
        raise ValueError(f"unknown mode {mode!r}")
    if h.n_qubits > 14:
        raise DimensionError("exact operator norm is capped at 14 qubits")
    if not len(h):
        return 0.0
    op = to_operator(h, dense=h.n_qubits <= tol.dense_max_qubits)
    if op.is_sparse:
        vals = spla.eigsh(op.matrix, k=2, which="BE", return_eigenvectors=False)
        return float(np.max(np.abs(vals)))
    return float(np.max(np.abs(np.linalg.eigvalsh(op.matrix))))


def permute_state(psi: np.ndarray, order: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors: output factor ``p`` is input qubit ``order[p]``."""
    n = len(order)
    return psi.reshape((2,) * n).transpose(list(order)).reshape(-1)
