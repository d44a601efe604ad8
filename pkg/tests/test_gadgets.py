import dataclasses
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pertgadget.gadgets import (
    MEASUREMENT,
    GadgetError,
    GadgetModel,
    RecipeError,
    RecipeSpec,
    build_from_recipe,
    build_k_local,
    build_measurement_gadget,
    build_three_local,
    decompose_xyz,
    default_recipe,
    interleave_order,
    jordan_farhi_recipe,
    lambda_max,
    measurement_groups,
    measurement_width,
    odd_subsets,
    validate_recipe,
)
from pertgadget.linalg import to_operator
from pertgadget.pauli import PauliString, PauliSum, multiply, parse_pauli_sum, qubitwise_commute
from pertgadget.perturbation import effective_hamiltonian


def P(text):
    return parse_pauli_sum(text)


def S(text):
    return P(f"1 {text}").strings[0]


def random_target(rng, n, r, kmin=2, kmax=None):
    kmax = n if kmax is None else kmax
    terms = []
    for _ in range(r):
        k = int(rng.integers(kmin, kmax + 1))
        qubits = sorted(rng.choice(n, size=k, replace=False))
        terms.append((float(rng.uniform(-2, 2)), PauliString({int(q): str(rng.choice(list("XYZ"))) for q in qubits})))
    return PauliSum(terms, n_qubits=n)


def register_product(g, s):
    return math.prod(g.c_tilde[s])


# --- lambda_max


def test_lambda_max_examples():
    assert lambda_max(P("1 [Z0 Z1 Z2 Z3]")) == pytest.approx(1 / 16)
    assert lambda_max(P("1 [Z0 Z1 Z2 Z3]\n1 [X0 X1 X2 X3]")) == pytest.approx(1 / 32)
    assert lambda_max(P("1 [X0]")) == pytest.approx(1 / 4)
    with pytest.raises(GadgetError):
        lambda_max(P("2 []"))


# --- three-local


def test_three_local_single_term():
    g = build_three_local(P("1.0 [Z0 Z1 Z2]"))
    assert g.total_qubits == 6
    assert g.aux_registers == ((3, 4, 5),)
    assert len(g.h_aux) == 3 + 1  # three Z terms and the constant
    assert g.v == P("qubits: 6\n1 [Z0 X3 X4]\n1 [Z1 X4 X5]\n1 [Z2 X3 X5]")
    assert g.order == 3 and g.ground_energy_unperturbed == 0.0
    h = to_operator(g.h_aux).toarray()
    np.testing.assert_allclose(np.sort(np.unique(np.diag(h).real)), [0, 1, 2, 3])


def test_three_local_layout_of_figure_size():
    target = PauliSum([(1.0, PauliString({q: "Z" for q in (0, 1, 2, 3)})),
                       (0.5, PauliString({q: "X" for q in (1, 2, 3, 4)}))], n_qubits=5)
    g = build_three_local(target)
    assert g.total_qubits == 13
    assert g.aux_registers == ((5, 6, 7, 8), (9, 10, 11, 12))
    # v plus projector terms: 2 r k
    assert len(g.v) + (len(g.h_aux) - 1) == 2 * 2 * 4


def test_identity_is_split_off():
    g = build_three_local(P("0.7 []\n1 [Z0 Z1]"))
    assert g.shift == pytest.approx(0.7)
    assert g.target.identity_coefficient() == 0.0


@pytest.mark.parametrize("seed", range(8))
def test_three_local_invariants(seed):
    rng = np.random.default_rng(seed)
    target = random_target(rng, 4, int(rng.integers(1, 4)), kmin=1)
    g = build_three_local(target)
    k = target.max_weight()
    assert max(s.weight for s in g.v.strings) <= 3
    assert max(s.weight for s in g.h_aux.strings) <= 1
    aux = set(q for reg in g.aux_registers for q in reg)
    assert aux.isdisjoint(g.target_qubits)
    assert aux | set(g.target_qubits) == set(range(g.total_qubits))
    if k >= 2:
        assert g.total_qubits == target.n_qubits + len(target) * k
        for s, (c, _) in enumerate(target):
            assert register_product(g, s) == pytest.approx(-((-1) ** k) * c, rel=1e-12)
        for s in g.h_aux.strings:
            assert not set(s.support) & set(g.target_qubits)


def test_mixed_weight_padding():
    g = build_three_local(P("1 [Z0 Z1 Z2]\n0.5 [X1]"))
    pad = [s for s in g.v.strings if not set(s.support) & {0, 1, 2}]
    assert len(pad) == 2
    assert all(s.weight == 2 for s in pad)


def test_all_weight_one_passes_through():
    target = P("1 [X0]\n0.5 [Z1]")
    g = build_three_local(target)
    assert g.order == 1 and g.aux_registers == ()
    assert g.v == target


# --- k'-local


@pytest.mark.parametrize("seed", range(10))
def test_k_local_three_equals_three_local(seed):
    rng = np.random.default_rng(100 + seed)
    k = int(rng.integers(2, 5))
    target = random_target(rng, 5, int(rng.integers(1, 4)), kmin=k, kmax=k)
    a, b = build_k_local(target, 3), build_three_local(target)
    assert set(a.v.terms) == set(b.v.terms)
    assert set(a.h_aux.terms) == set(b.h_aux.terms)


def test_k_local_widths():
    g = build_k_local(P("1 [Z0 Z1 Z2 Z3]"), 4)
    assert g.aux_registers == ((4, 5),)
    assert all(s.weight == 4 for s in g.v.strings)
    assert g.order == 2
    g = build_k_local(P("1 [Z0 Z1 Z2 Z3 Z4]"), 5)
    assert len(g.aux_registers[0]) == 2
    weights = [sum(1 for q in s.support if q < 5) for s in g.v.strings]
    assert sorted(weights) == [2, 3]
    assert register_product(g, 0) == pytest.approx(-1.0)
    with pytest.raises(GadgetError):
        build_k_local(P("1 [Z0 Z1 Z2]"), 6)
    with pytest.raises(GadgetError):
        build_k_local(P("1 [Z0 Z1 Z2]"), 2)


@pytest.mark.parametrize("k,kp", [(4, 4), (5, 5), (6, 4), (5, 3)])
def test_k_local_locality_and_products(k, kp):
    target = PauliSum([(0.8, PauliString({q: "XYZ"[q % 3] for q in range(k)}))])
    g = build_k_local(target, kp)
    assert max(s.weight for s in g.v.strings) <= kp
    width = math.ceil(k / (kp - 2))
    assert g.order == width
    assert register_product(g, 0) == pytest.approx(-((-1) ** width) * 0.8)


# --- recipe


@pytest.mark.parametrize("k", [2, 3, 4])
def test_default_recipe_valid(k):
    report = validate_recipe(default_recipe(k))
    assert report.passed
    assert report.ground_energy == pytest.approx(0.0)


@pytest.mark.parametrize("k", [3, 4])
def test_jordan_farhi_rejected(k):
    report = validate_recipe(jordan_farhi_recipe(k))
    assert not report.passed
    check = report["unique_ground_state"]
    assert "degenerate ground space" in check.detail
    assert check.witness.shape == (2**k, 2)
    support = {int(i) for i in np.flatnonzero(np.abs(check.witness).sum(axis=1) > 1e-9)}
    assert support == {0, 2**k - 1}


def test_z_factors_fail_fixing():
    spec = RecipeSpec(default_recipe(3).penalization, tuple(PauliString({j: "Z"}) for j in range(3)))
    report = validate_recipe(spec)
    assert report["unique_ground_state"].passed
    assert not report["partial_products_vanish"].passed
    assert report["partial_products_vanish"].witness == [1]


def test_recipe_json_roundtrip():
    spec = default_recipe(3, "spread")
    again = RecipeSpec.from_json(spec.to_json())
    assert again == spec


def test_recipe_matches_three_local():
    target = P("1 [Z0 Z1 Z2]\n-0.5 [X0 Y1 Z2]")
    a = build_from_recipe(target, default_recipe(3))
    b = build_three_local(target)
    assert set(a.v.terms) == set(b.v.terms)
    assert set(a.h_aux.terms) == set(b.h_aux.terms)


def test_spread_coefficients_same_effective_coupling():
    target = P("1 [Z0 Z1 Z2]")
    a = build_from_recipe(target, default_recipe(3))
    b = build_from_recipe(target, default_recipe(3, "spread"))
    assert math.prod(b.c_tilde[0]) == pytest.approx(math.prod(a.c_tilde[0]))
    da, db = effective_hamiltonian(a, 0.01), effective_hamiltonian(b, 0.01)
    assert db.a_fit == pytest.approx(da.a_fit, rel=1e-2)


def test_invalid_recipe_propagates():
    with pytest.raises(RecipeError) as exc:
        build_from_recipe(P("1 [Z0 Z1 Z2]"), jordan_farhi_recipe(3))
    assert not exc.value.report.passed
    with pytest.raises(GadgetError):
        build_from_recipe(P("1 [Z0 Z1]"), default_recipe(3))


# --- measurement gadget


def test_decompose_xyz():
    x, y, z = decompose_xyz(S("[X0 Y1 X2 Z3]"))
    assert (x, y, z) == (S("[X0 X2]"), S("[Y1]"), S("[Z3]"))
    assert decompose_xyz(S("[Z0 Z1]")) == (PauliString(), PauliString(), S("[Z0 Z1]"))
    assert decompose_xyz(PauliString()) == (PauliString(),) * 3


@settings(max_examples=100, deadline=None)
@given(st.text(alphabet="IXYZ", min_size=1, max_size=8))
def test_decompose_reconstructs(label):
    s = PauliString.from_label(label)
    x, y, z = decompose_xyz(s)
    xy = multiply(x, y)
    xyz = multiply(xy.string, z)
    assert xy.phase * xyz.phase == 1 and xyz.string == s


def test_measurement_single_term():
    g = build_measurement_gadget(P("1 [X0 Y1 Z2]"))
    assert g.kind == MEASUREMENT
    assert g.total_qubits == 5 and g.measurement.q == 2
    assert g.measurement.subsets == ((1,),)
    assert g.v == P("qubits: 5\n1 [X0 X3]\n1 [Y1 X4]\n1 [Z2 X3 X4]")
    assert g.ground_energy_unperturbed == -2.0
    assert g.lambda_max == pytest.approx(1 / 6)


def test_measurement_width_and_table_assignment():
    assert [measurement_width(r) for r in (1, 2, 3, 4, 5, 16, 17)] == [2, 4, 6, 6, 8, 10, 12]
    target = PauliSum([(1.0 + 0.1 * i, PauliString({3 * i: "X", 3 * i + 1: "Y", 3 * i + 2: "Z"})) for i in range(16)])
    assert len(target) == 16
    g = build_measurement_gadget(target)
    n = target.n_qubits
    assert g.measurement.q == 10
    assert g.measurement.subsets[0] == (1,)
    assert g.measurement.subsets[5] == (1, 2, 3)
    assert _aux_part(g, 0, "Z") == PauliString({n: "X", n + 1: "X"})
    assert _aux_part(g, 0, "X") == PauliString({n: "X"})
    assert _aux_part(g, 0, "Y") == PauliString({n + 1: "X"})


def test_measurement_empty_axis_parts_keep_aux_factor():
    g = build_measurement_gadget(PauliSum([(1.0, PauliString({0: "Z"}))], n_qubits=1))
    assert g.v == P("qubits: 3\n1 [X1]\n1 [X2]\n1 [Z0 X1 X2]")


def test_odd_subsets_order():
    assert odd_subsets(3) == [(1,), (2,), (3,), (1, 2, 3)]
    assert len(odd_subsets(5)) == 2**4


def test_negative_coefficient_cube_root():
    g = build_measurement_gadget(P("-8 [Z0 Z1]"))
    assert g.measurement.c_tilde == (pytest.approx(-2.0),)
    for m, ct, (c, _) in zip(g.measurement.subsets, g.measurement.c_tilde, g.target):
        assert ct**3 == pytest.approx(c * len(m) ** 2)


def _aux_part(g, s, axis):
    """Auxiliary factor of the v term carrying the ``axis`` part of target term ``s``."""
    n = g.n_target
    want = decompose_xyz(g.target.terms[s][1])["XYZ".index(axis)]
    hits = [t for t in g.v.strings
            if PauliString({q: a for q, a in t.ops if q < n}) == want and g.v_axes[t] == axis]
    assert len(hits) == 1
    return PauliString({q: a for q, a in hits[0].ops if q >= n})


@pytest.mark.parametrize("r", [2, 5])
def test_measurement_triple_products(r):
    target = PauliSum([(1.0, PauliString({3 * s: "X", 3 * s + 1: "Y", 3 * s + 2: "Z"})) for s in range(r)])
    g = build_measurement_gadget(target)
    parts = {(s, a): _aux_part(g, s, a) for s in range(r) for a in "XYZ"}
    keys = list(parts)
    for k1, k2, k3 in itertools.product(keys, repeat=3):
        prod = multiply(multiply(parts[k1], parts[k2]).string, parts[k3]).string
        expected = k1[0] == k2[0] == k3[0] and {k1[1], k2[1], k3[1]} == {"X", "Y", "Z"}
        assert (prod.weight == 0) == expected, (k1, k2, k3)


@pytest.mark.parametrize("r", [1, 4, 16])
def test_measurement_groups_four(r):
    target = PauliSum([(1.0 + 0.01 * s, PauliString({0: "X", 1: "Y", 2: "Z", 3 + s // 4: "XYZ"[s % 3]}))
                       for s in range(r)])
    g = build_measurement_gadget(target)
    groups = measurement_groups(g)
    assert [name for name, _ in groups] == ["aux-Z", "X", "Y", "Z"]
    union = PauliSum((), n_qubits=g.total_qubits)
    for _, grp in groups:
        for a, b in itertools.combinations(grp.strings, 2):
            assert qubitwise_commute(a, b)
        union = union + grp
    assert union == g.h_aux + g.v


def test_groups_three_local_z_target():
    g = build_three_local(P("1 [Z0 Z1 Z2]\n0.5 [Z1 Z2]"))
    names = [name for name, _ in measurement_groups(g)]
    assert names == ["aux-Z", "Z"]


def test_groups_empty_v_and_bad_kind():
    g = build_three_local(P("1 [Z0 Z1 Z2]"))
    empty = dataclasses.replace(g, v=PauliSum((), n_qubits=g.total_qubits))
    assert len(measurement_groups(empty)) == 1
    with pytest.raises(GadgetError):
        measurement_groups(build_k_local(P("1 [Z0 Z1 Z2 Z3]"), 4))


# --- ordering


def test_interleave_single_term():
    g = build_three_local(P("1 [Z0 Z1 Z2]"))
    perm = interleave_order(g)
    assert perm == (0, 2, 4, 1, 3, 5)


def test_interleave_two_registers():
    target = PauliSum([(1.0, PauliString({q: "Z" for q in (0, 1, 2, 3)})),
                       (1.0, PauliString({q: "X" for q in (1, 2, 3, 4)}))], n_qubits=5)
    g = build_three_local(target)
    perm = interleave_order(g)
    inv = np.argsort(perm)
    # each aux qubit sits immediately after its target qubit or after another aux of the same block
    assert list(inv) == [0, 5, 1, 6, 9, 2, 7, 10, 3, 8, 11, 4, 12]


@pytest.mark.parametrize("seed", range(4))
def test_interleave_preserves_spectrum(seed):
    rng = np.random.default_rng(seed)
    target = random_target(rng, 3, 2, kmin=2, kmax=3)
    g = build_three_local(target)
    gp = g.permuted(interleave_order(g))
    lam = 0.5 * g.lambda_max
    a = np.linalg.eigvalsh(to_operator(g.hamiltonian(lam)).toarray())
    b = np.linalg.eigvalsh(to_operator(gp.hamiltonian(lam)).toarray())
    np.testing.assert_allclose(a, b, atol=1e-10)
    with pytest.raises(GadgetError):
        interleave_order(gp)


def test_interleave_wrong_kind():
    with pytest.raises(GadgetError):
        interleave_order(build_measurement_gadget(P("1 [Z0 Z1]")))


# --- serialization


@pytest.mark.parametrize("builder", [
    lambda t: build_three_local(t),
    lambda t: build_k_local(t, 4),
    lambda t: build_measurement_gadget(t),
    lambda t: build_from_recipe(t, default_recipe(4)),
])
def test_json_roundtrip(builder):
    t = P("0.25 []\n1 [Z0 Z1 Z2 Z3]\n-0.5 [X0 Y1 X2 Z3]")
    g = builder(t)
    again = GadgetModel.loads(g.dumps())
    assert again == g
    assert again.v_axes == g.v_axes
    assert again.measurement == g.measurement
