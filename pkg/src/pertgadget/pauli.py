"""Pauli strings, real-weighted Pauli sums and the Hamiltonian text format.

A :class:`PauliString` is phase free: it records which non-identity axis sits
on which qubit.  Products of strings carry a fourth-root-of-unity phase and are
returned as :class:`PhasedProduct`.

Text format, one term per line::

    qubits: 5            # optional header
    0.5 [X0 Z3]
    -1.25 [Y1]
    2.0 []               # identity term
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

AXES = ("X", "Y", "Z")
_AXIS_CODE = {"X": 0, "Y": 1, "Z": 2}

#: coefficients with magnitude at or below this are dropped after merging
MERGE_TOL = 1e-12

# (a, b) -> (power of i, product axis) for distinct single-qubit Paulis
_SINGLE_PRODUCT = {
    ("X", "Y"): (1, "Z"),
    ("Y", "Z"): (1, "X"),
    ("Z", "X"): (1, "Y"),
    ("Y", "X"): (3, "Z"),
    ("Z", "Y"): (3, "X"),
    ("X", "Z"): (3, "Y"),
}
_PHASES = (1, 1j, -1, -1j)


class PauliError(ValueError):
    """Invalid Pauli data (bad axis, negative index, bad mapping...)."""


class PauliParseError(PauliError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class PauliString:
    """Tensor product of single-qubit Paulis, identity on absent qubits.

    Parameters
    ----------
    ops : mapping or iterable of (index, axis), optional
        Qubit index to axis in ``{"X", "Y", "Z"}``.  ``"I"`` entries are
        accepted and dropped.
    """

    __slots__ = ("_ops", "_hash")

    def __init__(self, ops: Mapping[int, str] | Iterable[tuple[int, str]] | None = None):
        items = ops.items() if isinstance(ops, Mapping) else (ops or ())
        cleaned: dict[int, str] = {}
        for q, axis in items:
            q = int(q)
            axis = str(axis).upper()
            if q < 0:
                raise PauliError(f"negative qubit index {q}")
            if axis == "I":
                continue
            if axis not in _AXIS_CODE:
                raise PauliError(f"unknown axis {axis!r}")
            if q in cleaned:
                raise PauliError(f"duplicate axis on qubit {q}")
            cleaned[q] = axis
        self._ops = tuple(sorted(cleaned.items()))
        self._hash = hash(self._ops)

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        """``"XIZ"`` -> X on qubit 0, Z on qubit 2."""
        return cls(enumerate(label))

    @classmethod
    def identity(cls) -> "PauliString":
        return cls()

    @property
    def ops(self) -> tuple[tuple[int, str], ...]:
        return self._ops

    def as_dict(self) -> dict[int, str]:
        return dict(self._ops)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(q for q, _ in self._ops)

    @property
    def weight(self) -> int:
        return len(self._ops)

    def axis(self, q: int) -> str:
        """Axis on qubit ``q`` (``"I"`` when absent)."""
        for idx, a in self._ops:
            if idx == q:
                return a
        return "I"

    def max_index(self) -> int:
        return self._ops[-1][0] if self._ops else -1

    def sort_key(self) -> tuple[tuple[int, int], ...]:
        return tuple((q, _AXIS_CODE[a]) for q, a in self._ops)

    def label(self, n_qubits: int) -> str:
        chars = ["I"] * n_qubits
        for q, a in self._ops:
            chars[q] = a
        return "".join(chars)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PauliString):
            return NotImplemented
        return self._ops == other._ops

    def __hash__(self) -> int:
        return self._hash

    def __lt__(self, other: "PauliString") -> bool:
        return self.sort_key() < other.sort_key()

    def __mul__(self, other: "PauliString") -> "PhasedProduct":
        return multiply(self, other)

    def __str__(self) -> str:
        return "[" + " ".join(f"{a}{q}" for q, a in self._ops) + "]"

    def __repr__(self) -> str:
        return f"PauliString({str(self)})"


@dataclass(frozen=True)
class PhasedProduct:
    """``phase * string`` with phase in {1, -1, 1j, -1j}."""

    phase: complex
    string: PauliString


def multiply(a: PauliString, b: PauliString) -> PhasedProduct:
    """Operator product ``a @ b`` as a phased Pauli string."""
    power = 0
    result = dict(a.ops)
    for q, bx in b.ops:
        ax = result.get(q)
        if ax is None:
            result[q] = bx
        elif ax == bx:
            del result[q]
        else:
            p, c = _SINGLE_PRODUCT[(ax, bx)]
            power += p
            result[q] = c
    return PhasedProduct(_PHASES[power % 4], PauliString(result))


def weight(p: PauliString) -> int:
    return p.weight


def commutes(a: PauliString, b: PauliString) -> bool:
    """True when ``a`` and ``b`` commute as operators."""
    bd = b.as_dict()
    clashes = sum(1 for q, ax in a.ops if q in bd and bd[q] != ax)
    return clashes % 2 == 0


def qubitwise_commute(a: PauliString, b: PauliString) -> bool:
    bd = b.as_dict()
    return all(bd.get(q, ax) == ax for q, ax in a.ops)


def embed(term: PauliString, mapping: Mapping[int, int]) -> PauliString:
    """Relabel qubits of ``term`` through an injective ``mapping``."""
    new: dict[int, str] = {}
    for q, ax in term.ops:
        if q not in mapping:
            raise PauliError(f"mapping has no image for support qubit {q}")
        target = int(mapping[q])
        if target in new:
            raise PauliError(f"mapping collision on qubit {target}")
        new[target] = ax
    return PauliString(new)


class PauliSum:
    """Real-weighted sum of Pauli strings on a declared register width.

    Construction normalizes: equal strings are merged, near-zero coefficients
    dropped and terms put into canonical order.
    """

    __slots__ = ("_terms", "_n_qubits")

    def __init__(self, terms: Iterable[tuple[float, PauliString]] = (), n_qubits: int | None = None):
        merged: dict[PauliString, float] = {}
        for coeff, string in terms:
            if not isinstance(string, PauliString):
                string = PauliString(string)
            merged[string] = merged.get(string, 0.0) + float(coeff)
        kept = [(c, s) for s, c in merged.items() if abs(c) > MERGE_TOL]
        kept.sort(key=lambda t: t[1].sort_key())
        width = 1 + max((s.max_index() for s in merged), default=-1)
        if n_qubits is None:
            n_qubits = width
        elif width > n_qubits:
            raise PauliError(f"term acts on qubit {width - 1} but register width is {n_qubits}")
        self._terms = tuple(kept)
        self._n_qubits = int(n_qubits)

    @classmethod
    def from_labels(cls, pairs: Iterable[tuple[float, str]]) -> "PauliSum":
        pairs = list(pairs)
        n = max((len(lbl) for _, lbl in pairs), default=0)
        return cls(((c, PauliString.from_label(lbl)) for c, lbl in pairs), n_qubits=n)

    @property
    def terms(self) -> tuple[tuple[float, PauliString], ...]:
        return self._terms

    @property
    def n_qubits(self) -> int:
        return self._n_qubits

    @property
    def strings(self) -> list[PauliString]:
        return [s for _, s in self._terms]

    @property
    def coeffs(self) -> list[float]:
        return [c for c, _ in self._terms]

    def __iter__(self) -> Iterator[tuple[float, PauliString]]:
        return iter(self._terms)

    def __len__(self) -> int:
        return len(self._terms)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PauliSum):
            return NotImplemented
        return self._n_qubits == other._n_qubits and self._terms == other._terms

    def __hash__(self):
        return hash((self._terms, self._n_qubits))

    def coefficient(self, string: PauliString) -> float:
        for c, s in self._terms:
            if s == string:
                return c
        return 0.0

    def max_weight(self) -> int:
        return max((s.weight for _, s in self._terms), default=0)

    def identity_coefficient(self) -> float:
        return self.coefficient(PauliString())

    def without_identity(self) -> "PauliSum":
        return PauliSum(((c, s) for c, s in self._terms if s.weight), n_qubits=self._n_qubits)

    def with_width(self, n_qubits: int) -> "PauliSum":
        return PauliSum(self._terms, n_qubits=n_qubits)

    def relabel(self, mapping: Mapping[int, int], n_qubits: int | None = None) -> "PauliSum":
        return PauliSum(((c, embed(s, mapping)) for c, s in self._terms), n_qubits=n_qubits)

    def l1_norm(self) -> float:
        return float(sum(abs(c) for c, _ in self._terms))

    def __add__(self, other: "PauliSum") -> "PauliSum":
        return PauliSum(self._terms + other._terms, n_qubits=max(self._n_qubits, other._n_qubits))

    def __mul__(self, scalar: float) -> "PauliSum":
        return PauliSum(((scalar * c, s) for c, s in self._terms), n_qubits=self._n_qubits)

    __rmul__ = __mul__

    def __str__(self) -> str:
        return format_pauli_sum(self)

    def __repr__(self) -> str:
        return f"PauliSum({len(self)} terms, n_qubits={self._n_qubits})"


# --------------------------------------------------------------------------
# text format

_HEADER = re.compile(r"qubits\s*:\s*(\S+)\s*$")
_TERM = re.compile(r"([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)\s*\[([^\]]*)\]\s*$")
_FACTOR = re.compile(r"([A-Za-z])(\d+)$")


def parse_pauli_sum(text: str) -> PauliSum:
    """Parse the Hamiltonian text format into a normalized :class:`PauliSum`."""
    declared: int | None = None
    terms: list[tuple[float, PauliString]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        stripped = line.strip()
        if not stripped:
            continue
        col0 = len(line) - len(line.lstrip()) + 1
        if stripped.lower().startswith("qubits"):
            m = _HEADER.match(stripped)
            if m is None or not m.group(1).isdigit():
                raise PauliParseError("malformed header, expected 'qubits: <N>'", lineno, col0)
            if declared is not None:
                raise PauliParseError("duplicate 'qubits' header", lineno, col0)
            if terms:
                raise PauliParseError("'qubits' header must precede all terms", lineno, col0)
            declared = int(m.group(1))
            continue
        m = _TERM.match(stripped)
        if m is None:
            raise PauliParseError("expected '<coeff> [<AXIS><index> ...]'", lineno, col0)
        coeff = float(m.group(1))
        body = m.group(2)
        body_col = col0 + m.start(2)
        ops: dict[int, str] = {}
        for tok in re.finditer(r"\S+", body):
            col = body_col + tok.start()
            fm = _FACTOR.match(tok.group())
            if fm is None or fm.group(1).upper() not in _AXIS_CODE:
                raise PauliParseError(f"bad factor {tok.group()!r}", lineno, col)
            q = int(fm.group(2))
            if q in ops:
                raise PauliParseError(f"duplicate axis on qubit {q}", lineno, col)
            if declared is not None and q >= declared:
                raise PauliParseError(f"qubit index {q} >= declared width {declared}", lineno, col)
            ops[q] = fm.group(1).upper()
        terms.append((coeff, PauliString(ops)))
    return PauliSum(terms, n_qubits=declared)


def format_pauli_sum(h: PauliSum, header: bool = True) -> str:
    lines = [f"qubits: {h.n_qubits}"] if header else []
    lines += [f"{c!r} {s}" for c, s in h.terms]
    return "\n".join(lines) + "\n"


def term_to_text(string: PauliString) -> str:
    return " ".join(f"{a}{q}" for q, a in string.ops)


def term_from_text(text: str) -> PauliString:
    """Inverse of :func:`term_to_text` (brackets optional)."""
    body = text.strip().strip("[]")
    return parse_pauli_sum(f"1 [{body}]").terms[0][1] if body else PauliString()
