"""Gadget Hamiltonians: three-local, k'-local, recipe-based and measurement gadgets.

All builders lay the register out as ``[target qubits | aux register 1 | ...]``
and return a :class:`GadgetModel`.  The gadget Hamiltonian at strength ``lam``
is ``model.h_aux + lam * model.v``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .pauli import (
    AXES,
    PauliError,
    PauliString,
    PauliSum,
    embed,
    multiply,
    qubitwise_commute,
    term_from_text,
    term_to_text,
)

THREE_LOCAL = "three-local"
K_LOCAL = "k-local"
RECIPE = "recipe"
MEASUREMENT = "measurement"
KINDS = (THREE_LOCAL, K_LOCAL, RECIPE, MEASUREMENT)

RECIPE_WIDTH_CAP = 12


class GadgetError(ValueError):
    pass


@dataclass(frozen=True)
class MeasurementLayout:
    q: int
    subsets: tuple[tuple[int, ...], ...]
    c_tilde: tuple[float, ...]


@dataclass(frozen=True)
class GadgetModel:
    """A constructed gadget.

    ``target`` excludes the identity component, which is kept in ``shift``.
    ``target_qubits[i]`` is the position of target qubit ``i`` in the full
    register (``range(n)`` unless the model was permuted).
    """

    kind: str
    target: PauliSum
    shift: float
    target_qubits: tuple[int, ...]
    aux_registers: tuple[tuple[int, ...], ...]
    register_terms: tuple[int, ...]
    h_aux: PauliSum
    v: PauliSum
    v_axes: dict = field(default_factory=dict, compare=False)
    lambda_max: float = 0.0
    ground_energy_unperturbed: float = 0.0
    order: int = 1
    c_tilde: tuple[tuple[float, ...], ...] = ()
    k_prime: int | None = None
    measurement: MeasurementLayout | None = None

    @property
    def n_target(self) -> int:
        return len(self.target_qubits)

    @property
    def total_qubits(self) -> int:
        return self.h_aux.n_qubits

    @property
    def aux_qubits(self) -> tuple[int, ...]:
        return tuple(sorted(q for reg in self.aux_registers for q in reg))

    def hamiltonian(self, lam: float) -> PauliSum:
        return self.h_aux + lam * self.v

    def target_embedded(self) -> PauliSum:
        """Target (without identity) acting on the full register."""
        mapping = dict(enumerate(self.target_qubits))
        return self.target.relabel(mapping, n_qubits=self.total_qubits)

    def permuted(self, perm: Sequence[int]) -> "GadgetModel":
        """Relabel every qubit ``q`` as ``perm[q]``."""
        perm = tuple(int(p) for p in perm)
        if sorted(perm) != list(range(self.total_qubits)):
            raise GadgetError("not a permutation of the register")
        mapping = dict(enumerate(perm))
        n = self.total_qubits
        return replace(
            self,
            target_qubits=tuple(perm[q] for q in self.target_qubits),
            aux_registers=tuple(tuple(perm[q] for q in reg) for reg in self.aux_registers),
            h_aux=self.h_aux.relabel(mapping, n),
            v=self.v.relabel(mapping, n),
            v_axes={embed(s, mapping): a for s, a in self.v_axes.items()},
        )

    # ---- serialization
    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "n_target": self.n_target,
            "total_qubits": self.total_qubits,
            "target": [[c, term_to_text(s)] for c, s in self.target],
            "shift": self.shift,
            "target_qubits": list(self.target_qubits),
            "aux_registers": [list(r) for r in self.aux_registers],
            "register_terms": list(self.register_terms),
            "h_aux": [[c, term_to_text(s)] for c, s in self.h_aux],
            "v": [[c, term_to_text(s), self.v_axes.get(s, "")] for c, s in self.v],
            "lambda_max": self.lambda_max,
            "ground_energy_unperturbed": self.ground_energy_unperturbed,
            "order": self.order,
            "c_tilde": [list(c) for c in self.c_tilde],
            "k_prime": self.k_prime,
            "measurement": None if self.measurement is None else {
                "q": self.measurement.q,
                "subsets": [list(m) for m in self.measurement.subsets],
                "c_tilde": list(self.measurement.c_tilde),
            },
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)

    @classmethod
    def from_json(cls, data: dict) -> "GadgetModel":
        n = data["total_qubits"]

        def terms(rows, width):
            return PauliSum(((row[0], term_from_text(row[1])) for row in rows), n_qubits=width)

        v_rows = data["v"]
        meas = data.get("measurement")
        return cls(
            kind=data["kind"],
            target=terms(data["target"], data["n_target"]),
            shift=data.get("shift", 0.0),
            target_qubits=tuple(data["target_qubits"]),
            aux_registers=tuple(tuple(r) for r in data["aux_registers"]),
            register_terms=tuple(data["register_terms"]),
            h_aux=terms(data["h_aux"], n),
            v=terms(v_rows, n),
            v_axes={term_from_text(r[1]): r[2] for r in v_rows if len(r) > 2},
            lambda_max=data["lambda_max"],
            ground_energy_unperturbed=data["ground_energy_unperturbed"],
            order=data["order"],
            c_tilde=tuple(tuple(c) for c in data.get("c_tilde", [])),
            k_prime=data.get("k_prime"),
            measurement=None if meas is None else MeasurementLayout(
                meas["q"], tuple(tuple(m) for m in meas["subsets"]), tuple(meas["c_tilde"])),
        )

    @classmethod
    def loads(cls, text: str) -> "GadgetModel":
        return cls.from_json(json.loads(text))


# --------------------------------------------------------------------------
# helpers

def _split_identity(target: PauliSum) -> tuple[PauliSum, float]:
    body = target.without_identity()
    if not len(body):
        raise GadgetError("target Hamiltonian has no non-identity terms")
    return body, target.identity_coefficient()


def _projector_sum(qubits: Sequence[int], n: int) -> PauliSum:
    """sum_q |1><1|_q = sum_q (1 - Z_q)/2."""
    terms = []
    for q in qubits:
        terms.append((0.5, PauliString()))
        terms.append((-0.5, PauliString({q: "Z"})))
    return PauliSum(terms, n_qubits=n)


def _join(*parts: PauliString) -> PauliString:
    """Product of Pauli strings with disjoint supports."""
    ops: dict[int, str] = {}
    for p in parts:
        for q, a in p.ops:
            if q in ops:
                raise GadgetError(f"overlapping supports on qubit {q}")
            ops[q] = a
    return PauliString(ops)


def _xx(q1: int, q2: int) -> PauliString:
    return PauliString({q1: "X", q2: "X"})


def _leading_sign(width: int) -> float:
    """First-term coefficient factor so that prod c_j = -(-1)^width c."""
    return -((-1) ** width)


def lambda_max(target: PauliSum, width: int | None = None) -> float:
    """Convergence bound 1 / (4 (sum_s |c_s| + r (k - 1))).

    ``width`` overrides ``k`` (the auxiliary register width); by default the
    maximal term weight is used.  Identity components are ignored.
    """
    body = target.without_identity()
    if not len(body):
        raise GadgetError("lambda_max of an empty Hamiltonian")
    k = body.max_weight() if width is None else width
    r = len(body)
    return 0.25 / (body.l1_norm() + r * (k - 1))


# --------------------------------------------------------------------------
# three-local and k'-local gadgets

def build_k_local(target: PauliSum, k_prime: int, *, _kind: str = K_LOCAL) -> GadgetModel:
    """Gadget with every term of weight at most ``k_prime``.

    Each target term gets a register of ``ceil(k / (k_prime - 2))`` auxiliary
    qubits; perturbation terms carry ``k_prime - 2`` target factors next to an
    ``XX`` pair on consecutive register qubits (cyclically).  Terms lighter
    than ``k`` are padded with bare ``XX`` pairs.  When the register width
    would be 1 the terms are already ``k_prime``-local and are passed through
    to ``v`` unchanged.
    """
    body, shift = _split_identity(target)
    n = body.n_qubits
    k = body.max_weight()
    if not 3 <= k_prime <= k + 2:
        raise GadgetError(f"k_prime must lie in [3, {k + 2}] for k={k}, got {k_prime}")
    chunk = k_prime - 2
    width = math.ceil(k / chunk)
    axes: dict[PauliString, str] = {}

    if width == 1:
        for _, s in body:
            axes[s] = s.ops[0][1] if len({a for _, a in s.ops}) == 1 else ""
        return GadgetModel(
            kind=_kind, target=body, shift=shift, target_qubits=tuple(range(n)),
            aux_registers=(), register_terms=(), h_aux=PauliSum((), n_qubits=n),
            v=body, v_axes=axes, lambda_max=lambda_max(body, 1), order=1,
            c_tilde=tuple((c,) for c, _ in body), k_prime=k_prime,
        )

    r = len(body)
    total = n + r * width
    registers = tuple(tuple(range(n + s * width, n + (s + 1) * width)) for s in range(r))
    v_terms = []
    c_tilde = []
    for s, (c, string) in enumerate(body):
        reg = registers[s]
        ops = list(string.ops)
        chunks = [PauliString(ops[i:i + chunk]) for i in range(0, len(ops), chunk)]
        coeffs = [_leading_sign(width) * c] + [1.0] * (width - 1)
        for j in range(width):
            pair = _xx(reg[j], reg[(j + 1) % width])
            if j < len(chunks):
                term = _join(chunks[j], pair)
                axis_set = {a for _, a in chunks[j].ops}
                axes[term] = axis_set.pop() if len(axis_set) == 1 else ""
            else:
                term = pair
                axes[term] = ""
            v_terms.append((coeffs[j], term))
        c_tilde.append(tuple(coeffs))
    return GadgetModel(
        kind=_kind, target=body, shift=shift, target_qubits=tuple(range(n)),
        aux_registers=registers, register_terms=tuple(range(r)),
        h_aux=_projector_sum([q for reg in registers for q in reg], total),
        v=PauliSum(v_terms, n_qubits=total), v_axes=axes,
        lambda_max=lambda_max(body, width), ground_energy_unperturbed=0.0,
        order=width, c_tilde=tuple(c_tilde), k_prime=k_prime,
    )


def build_three_local(target: PauliSum) -> GadgetModel:
    """Three-body gadget: one register of ``k`` auxiliary qubits per term.

    >>> from pertgadget.pauli import parse_pauli_sum
    >>> g = build_three_local(parse_pauli_sum("1.0 [Z0 Z1 Z2]"))
    >>> g.total_qubits
    6
    """
    return build_k_local(target, 3, _kind=THREE_LOCAL)


# --------------------------------------------------------------------------
# recipe

@dataclass(frozen=True)
class RecipeSpec:
    """Penalization ``H`` and factors ``a_1..a_k`` on one ``k``-qubit register.

    ``coefficients`` is ``"default"`` (whole sign and weight on the first
    factor) or ``"spread"`` (equal magnitude ``|c|^(1/k)`` on every factor,
    sign on the first).
    """

    penalization: PauliSum
    factors: tuple[PauliString, ...]
    coefficients: str = "default"

    @property
    def width(self) -> int:
        return self.penalization.n_qubits

    def to_json(self) -> dict:
        return {
            "width": self.width,
            "penalization": [[c, term_to_text(s)] for c, s in self.penalization],
            "factors": [term_to_text(a) for a in self.factors],
            "coefficients": self.coefficients,
        }

    @classmethod
    def from_json(cls, data: dict) -> "RecipeSpec":
        width = int(data["width"])
        pen = PauliSum(((c, term_from_text(t)) for c, t in data["penalization"]), n_qubits=width)
        return cls(pen, tuple(term_from_text(t) for t in data["factors"]),
                   data.get("coefficients", "default"))


def default_recipe(k: int, coefficients: str = "default") -> RecipeSpec:
    """h_i = |1><1|_i and a_j = X_j X_{j+1 mod k}."""
    return RecipeSpec(_projector_sum(range(k), k),
                      tuple(_xx(j, (j + 1) % k) for j in range(k)), coefficients)


def jordan_farhi_recipe(k: int) -> RecipeSpec:
    """Pairwise (1 - Z Z)/2 penalization with single-X factors."""
    terms = []
    for i, j in itertools.combinations(range(k), 2):
        terms += [(0.5, PauliString()), (-0.5, PauliString({i: "Z", j: "Z"}))]
    return RecipeSpec(PauliSum(terms, n_qubits=k), tuple(PauliString({j: "X"}) for j in range(k)))


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""
    witness: object = None


@dataclass
class RecipeReport:
    checks: list[Check]
    ground_energy: float
    gap: float
    ground_state: np.ndarray

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_json(self) -> dict:
        def wit(w):
            if isinstance(w, np.ndarray):
                return {"shape": list(w.shape), "re": w.real.tolist(), "im": w.imag.tolist()}
            return w
        return {
            "passed": self.passed,
            "ground_energy": self.ground_energy,
            "gap": self.gap,
            "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail,
                        "witness": wit(c.witness)} for c in self.checks],
        }


class RecipeError(GadgetError):
    def __init__(self, report: RecipeReport):
        failed = ", ".join(f"{c.name}: {c.detail}" for c in report.checks if not c.passed)
        super().__init__(f"invalid recipe ({failed})")
        self.report = report


def _apply_string(string: PauliString, phase: complex, vec: np.ndarray, n: int) -> np.ndarray:
    from .linalg import _masks, _popcount_parity

    x, z, ny = _masks(string, n)
    basis = np.arange(vec.size, dtype=np.int64)
    sign = 1.0 - 2.0 * _popcount_parity(basis & z)
    out = np.empty_like(vec)
    out[basis ^ x] = phase * (1j ** ny) * sign * vec
    return out


def validate_recipe(spec: RecipeSpec, tol: float = 1e-9) -> RecipeReport:
    """Brute-force check of the four recipe conditions on a single register."""
    from .linalg import to_operator

    k = spec.width
    if k > RECIPE_WIDTH_CAP:
        raise GadgetError(f"register width {k} over brute-force cap {RECIPE_WIDTH_CAP}")
    for a in spec.factors:
        if a.max_index() >= k:
            raise GadgetError(f"factor {a} leaves the {k}-qubit register")
    h = to_operator(spec.penalization, n_qubits=k, dense=True).matrix
    vals, vecs = np.linalg.eigh(h)
    scale = max(1.0, float(np.max(np.abs(vals))))
    degenerate = np.flatnonzero(vals - vals[0] <= tol * scale)
    gs = vecs[:, 0]
    gap = float(vals[len(degenerate)] - vals[0]) if len(degenerate) < len(vals) else 0.0
    checks = []

    if len(degenerate) == 1:
        checks.append(Check("unique_ground_state", True, "non-degenerate ground state"))
    else:
        checks.append(Check("unique_ground_state", False,
                            f"degenerate ground space of dimension {len(degenerate)}",
                            vecs[:, degenerate]))

    prod = PauliString()
    phase: complex = 1
    for a in spec.factors:
        p = multiply(prod, a)
        prod, phase = p.string, phase * p.phase
    a_gs = _apply_string(prod, phase, gs, k)
    mu = np.vdot(gs, a_gs)
    fixes = np.linalg.norm(a_gs - mu * gs) < 1e-7 and abs(mu) > 1 - 1e-7
    checks.append(Check("product_fixes_ground_state", bool(fixes),
                        f"<GS|A|GS> = {mu:.6g}", None if fixes else complex(mu)))

    offending = None
    m = len(spec.factors)
    for size in range(1, m):
        for subset in itertools.combinations(range(m), size):
            prod, phase = PauliString(), 1
            for j in subset:
                p = multiply(prod, spec.factors[j])
                prod, phase = p.string, phase * p.phase
            val = np.vdot(gs, _apply_string(prod, phase, gs, k))
            if abs(val) > 1e-7:
                offending = (tuple(j + 1 for j in subset), complex(val))
                break
        if offending:
            break
    checks.append(Check(
        "partial_products_vanish", offending is None,
        "all proper sub-products leave the ground state" if offending is None
        else f"subset {offending[0]} has ground matrix element {offending[1]:.6g}",
        None if offending is None else list(offending[0])))

    bad = [j + 1 for j, a in enumerate(spec.factors)
           if multiply(a, a).string.weight or multiply(a, a).phase != 1]
    checks.append(Check("factors_square_to_identity", not bad,
                        "ok" if not bad else f"factors {bad} do not square to identity", bad or None))
    return RecipeReport(checks, float(vals[0]), gap, gs)


def recipe_coefficients(c: float, k: int, rule: str) -> list[float]:
    lead = _leading_sign(k) * c
    if rule == "default":
        return [lead] + [1.0] * (k - 1)
    if rule == "spread":
        mag = abs(lead) ** (1.0 / k)
        return [math.copysign(mag, lead)] + [mag] * (k - 1)
    raise GadgetError(f"unknown coefficient rule {rule!r}")


def build_from_recipe(target: PauliSum, spec: RecipeSpec) -> GadgetModel:
    report = validate_recipe(spec)
    if not report.passed:
        raise RecipeError(report)
    body, shift = _split_identity(target)
    k = len(spec.factors)
    if k != body.max_weight():
        raise GadgetError(f"recipe has {k} factors but the target has weight {body.max_weight()}")
    width = spec.width
    n = body.n_qubits
    r = len(body)
    total = n + r * width
    registers = tuple(tuple(range(n + s * width, n + (s + 1) * width)) for s in range(r))
    h_aux = PauliSum((), n_qubits=total)
    v_terms = []
    c_tilde = []
    axes: dict[PauliString, str] = {}
    for s, (c, string) in enumerate(body):
        mapping = {i: registers[s][i] for i in range(width)}
        h_aux = h_aux + spec.penalization.relabel(mapping, total)
        coeffs = recipe_coefficients(c, k, spec.coefficients)
        ops = list(string.ops)
        for j, a in enumerate(spec.factors):
            aux = embed(a, mapping)
            if j < len(ops):
                term = _join(PauliString([ops[j]]), aux)
                axes[term] = ops[j][1]
            else:
                term = aux
                axes[term] = ""
            v_terms.append((coeffs[j], term))
        c_tilde.append(tuple(coeffs))
    v = PauliSum(v_terms, n_qubits=total)
    return GadgetModel(
        kind=RECIPE, target=body, shift=shift, target_qubits=tuple(range(n)),
        aux_registers=registers, register_terms=tuple(range(r)), h_aux=h_aux, v=v,
        v_axes=axes, lambda_max=report.gap / (4 * v.l1_norm()),
        ground_energy_unperturbed=r * report.ground_energy, order=k, c_tilde=tuple(c_tilde),
    )


# --------------------------------------------------------------------------
# measurement gadget

def decompose_xyz(term: PauliString) -> tuple[PauliString, PauliString, PauliString]:
    """Split a Pauli word into its X-, Y- and Z-only parts."""
    parts = {a: {} for a in AXES}
    for q, a in term.ops:
        parts[a][q] = a
    return PauliString(parts["X"]), PauliString(parts["Y"]), PauliString(parts["Z"])


def odd_subsets(m: int) -> list[tuple[int, ...]]:
    """Odd-cardinality subsets of {1..m}, by size then lexicographically."""
    out = []
    for size in range(1, m + 1, 2):
        out.extend(itertools.combinations(range(1, m + 1), size))
    return out


def measurement_width(r: int) -> int:
    """Smallest even q with 2^(q/2 - 1) >= r."""
    q = 2
    while 2 ** (q // 2 - 1) < r:
        q += 2
    return q


def _tau(pair: int, axis: str, n: int) -> PauliString:
    first, second = n + 2 * pair - 2, n + 2 * pair - 1
    return PauliString({"X": {first: "X"}, "Y": {second: "X"}, "Z": {first: "X", second: "X"}}[axis])


def build_measurement_gadget(target: PauliSum, subsets: Sequence[Sequence[int]] | None = None) -> GadgetModel:
    """Third-order gadget whose terms split into four qubitwise-commuting groups.

    ``subsets`` overrides the default assignment of odd subsets to terms.
    """
    body, shift = _split_identity(target)
    n = body.n_qubits
    r = len(body)
    q = measurement_width(r)
    if subsets is None:
        subsets = odd_subsets(q // 2)[:r]
    else:
        subsets = [tuple(sorted(m)) for m in subsets]
        q = max(q, 2 * max(max(m) for m in subsets))
        if len(subsets) != r or len(set(subsets)) != r or any(len(m) % 2 == 0 for m in subsets):
            raise GadgetError("need r distinct odd-cardinality subsets")
    subsets = tuple(tuple(m) for m in subsets)
    total = n + q
    aux = tuple(range(n, total))
    v_terms = []
    axes: dict[PauliString, str] = {}
    c_tilde = []
    for (c, string), m in zip(body, subsets):
        ct = float(np.cbrt(c * len(m) ** 2))
        c_tilde.append(ct)
        for axis, part in zip(AXES, decompose_xyz(string)):
            aux_part = PauliString()
            for i in m:
                aux_part = multiply(aux_part, _tau(i, axis, n)).string
            term = _join(part, aux_part)
            axes[term] = axis
            v_terms.append((ct, term))
    v = PauliSum(v_terms, n_qubits=total)
    h_aux = PauliSum(((-1.0, PauliString({a: "Z"})) for a in aux), n_qubits=total)
    return GadgetModel(
        kind=MEASUREMENT, target=body, shift=shift, target_qubits=tuple(range(n)),
        aux_registers=(aux,), register_terms=tuple(range(r)), h_aux=h_aux, v=v, v_axes=axes,
        lambda_max=1.0 / (2.0 * v.l1_norm()), ground_energy_unperturbed=-float(q), order=3,
        c_tilde=tuple((ct,) for ct in c_tilde),
        measurement=MeasurementLayout(q, subsets, tuple(c_tilde)),
    )


def measurement_groups(g: GadgetModel) -> list[tuple[str, PauliSum]]:
    """Partition of all terms of ``g`` into at most four qubitwise-commuting groups.

    Groups are named ``"aux-Z"``, ``"X"``, ``"Y"``, ``"Z"`` (target axis,
    auxiliaries in X).  Only non-empty groups are returned.
    """
    if g.kind not in (MEASUREMENT, THREE_LOCAL):
        raise GadgetError(f"measurement grouping is not defined for kind {g.kind!r}")
    buckets: dict[str, list] = {"aux-Z": list(g.h_aux.terms), "X": [], "Y": [], "Z": []}
    loose = []
    for c, s in g.v:
        label = g.v_axes.get(s, "")
        (buckets[label] if label else loose).append((c, s))
    if loose:
        home = next((a for a in AXES if buckets[a]), "Z")
        buckets[home].extend(loose)
    groups = [(name, PauliSum(terms, n_qubits=g.total_qubits))
              for name, terms in buckets.items() if terms]
    for name, grp in groups:
        strings = grp.strings
        for a, b in itertools.combinations(strings, 2):
            if not qubitwise_commute(a, b):
                raise GadgetError(f"group {name}: {a} and {b} do not commute qubitwise")
    return groups


# --------------------------------------------------------------------------
# qubit ordering

def interleave_order(g: GadgetModel) -> tuple[int, ...]:
    """Permutation ``perm[old] = new`` placing each auxiliary qubit next to its target.

    Auxiliary qubit ``(s, j)`` goes right after the target qubit coupled by
    the ``j``-th perturbation term of register ``s``; padding qubits follow
    the last coupled qubit of their register.
    """
    if g.kind != THREE_LOCAL:
        raise GadgetError(f"interleaving is defined for three-local gadgets, not {g.kind!r}")
    if g.target_qubits != tuple(range(g.n_target)):
        raise GadgetError("model is already permuted")
    after: dict[int, list[int]] = {t: [] for t in range(g.n_target)}
    for s, reg in enumerate(g.aux_registers):
        string = g.target.terms[g.register_terms[s]][1]
        support = string.support
        for j, t in enumerate(support):
            after[t].append(reg[j])
            if j == len(support) - 1:
                after[t].extend(reg[j + 1:])
    sequence: list[int] = []
    for t in range(g.n_target):
        sequence.append(t)
        sequence.extend(after[t])
    perm = [0] * g.total_qubits
    for new, old in enumerate(sequence):
        perm[old] = new
    return tuple(perm)
