import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pertgadget.linalg import pauli_matrix
from pertgadget.pauli import (
    PauliError,
    PauliParseError,
    PauliString,
    PauliSum,
    commutes,
    embed,
    format_pauli_sum,
    multiply,
    parse_pauli_sum,
    qubitwise_commute,
    term_from_text,
    term_to_text,
    weight,
)

N_MAX = 8


def labels(n):
    return st.text(alphabet="IXYZ", min_size=n, max_size=n)


@st.composite
def string_tuples(draw, count):
    n = draw(st.integers(1, N_MAX))
    return n, [PauliString.from_label(draw(labels(n))) for _ in range(count)]


def dense(p: PauliString, n: int) -> np.ndarray:
    return pauli_matrix(p.label(n))


# --- parsing


def test_parse_single_term():
    h = parse_pauli_sum("1.0 [Z0 Z1 Z2]")
    assert len(h) == 1
    assert h.max_weight() == 3
    assert h.n_qubits == 3


def test_parse_merges_duplicates():
    h = parse_pauli_sum("0.5 [X0]\n0.5 [X0]")
    assert h.terms == ((1.0, PauliString({0: "X"})),)


def test_parse_drops_cancelled_terms():
    h = parse_pauli_sum("qubits: 2\n0.5 [X0]\n-0.5 [X0]\n1 [Z1]")
    assert [s for _, s in h.terms] == [PauliString({1: "Z"})]
    assert h.n_qubits == 2


def test_parse_duplicate_axis_reports_position():
    with pytest.raises(PauliParseError) as exc:
        parse_pauli_sum("1.0 [X0 Y0]")
    assert exc.value.line == 1
    assert exc.value.column == 9
    assert "duplicate" in str(exc.value)


def test_parse_index_beyond_header():
    with pytest.raises(PauliParseError, match="declared width"):
        parse_pauli_sum("qubits: 2\n1.0 [X2]")


@pytest.mark.parametrize("text", ["1.0 X0", "abc [X0]", "1.0 [Q0]", "1.0 [X]", "qubits: two"])
def test_parse_syntax_errors(text):
    with pytest.raises(PauliParseError):
        parse_pauli_sum(text)


def test_header_after_terms_rejected():
    with pytest.raises(PauliParseError):
        parse_pauli_sum("1 [X0]\nqubits: 3")


def test_comments_blank_lines_identity():
    h = parse_pauli_sum("# comment\n\n2.0 []   # constant\n-1.25 [Y1]\n")
    assert h.identity_coefficient() == 2.0
    assert h.n_qubits == 2
    assert h.without_identity().identity_coefficient() == 0.0


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.floats(-5, 5, allow_nan=False).filter(lambda c: abs(c) > 1e-6),
                          labels(4)), min_size=1, max_size=6))
def test_parse_format_roundtrip(pairs):
    h = PauliSum.from_labels(pairs)
    again = parse_pauli_sum(format_pauli_sum(h))
    assert again == h
    assert again.n_qubits == h.n_qubits


def test_term_text_roundtrip():
    s = PauliString({0: "X", 3: "Z"})
    assert term_to_text(s) == "X0 Z3"
    assert term_from_text("[X0 Z3]") == s
    assert term_from_text("[]") == PauliString()


def test_canonical_order():
    h = parse_pauli_sum("1 [Z1]\n1 [X0 Y2]\n1 [Y0]\n1 [X0]")
    assert [str(s) for s in h.strings] == ["[X0]", "[X0 Y2]", "[Y0]", "[Z1]"]


def test_invalid_strings():
    with pytest.raises(PauliError):
        PauliString({-1: "X"})
    with pytest.raises(PauliError):
        PauliString([(0, "X"), (0, "Z")])
    assert PauliString({0: "I", 1: "X"}).weight == 1


# --- algebra


def test_multiply_examples():
    x0, y0 = PauliString({0: "X"}), PauliString({0: "Y"})
    assert multiply(x0, y0).phase == 1j
    assert multiply(x0, y0).string == PauliString({0: "Z"})
    xx = PauliString.from_label("XX")
    assert multiply(xx, xx) == multiply(PauliString(), PauliString())
    out = multiply(xx, PauliString.from_label("IXX"))
    assert out.phase == 1
    assert out.string == PauliString.from_label("XIX")


@pytest.mark.parametrize("label,expected", [("", 0), ("ZZZZZ", 5), ("XIY", 2)])
def test_weight(label, expected):
    assert weight(PauliString.from_label(label)) == expected


def test_qubitwise_examples():
    assert qubitwise_commute(PauliString.from_label("XX"), PauliString.from_label("X"))
    assert not qubitwise_commute(PauliString.from_label("X"), PauliString.from_label("Z"))
    assert qubitwise_commute(PauliString.from_label("ZZ"), PauliString.from_label("IIXX"))


def test_embed_examples():
    assert embed(PauliString({0: "Z"}), {0: 4}) == PauliString({4: "Z"})
    xx = PauliString.from_label("XX")
    assert embed(xx, {0: 1, 1: 0}) == xx
    with pytest.raises(PauliError):
        embed(PauliString({0: "X"}), {1: 2})
    with pytest.raises(PauliError):
        embed(xx, {0: 3, 1: 3})


@settings(max_examples=300, deadline=None)
@given(string_tuples(2))
def test_multiply_matches_matrices(data):
    n, (a, b) = data
    p = multiply(a, b)
    np.testing.assert_allclose(p.phase * dense(p.string, n), dense(a, n) @ dense(b, n), atol=1e-12)
    assert p.phase in (1, -1, 1j, -1j)
    assert p.string.weight <= a.weight + b.weight


@settings(max_examples=300, deadline=None)
@given(string_tuples(2))
def test_commutation_phase_relation(data):
    _, (a, b) = data
    ab, ba = multiply(a, b), multiply(b, a)
    assert ab.string == ba.string
    if commutes(a, b):
        assert ab.phase == ba.phase
    else:
        assert ab.phase == -ba.phase
    back = multiply(ab.string, b)
    assert back.string == a


@settings(max_examples=300, deadline=None)
@given(string_tuples(3))
def test_associativity_with_phase(data):
    n, (a, b, c) = data
    ab = multiply(a, b)
    left = multiply(ab.string, c)
    bc = multiply(b, c)
    right = multiply(a, bc.string)
    assert left.string == right.string
    assert ab.phase * left.phase == bc.phase * right.phase
    oracle = dense(a, n) @ dense(b, n) @ dense(c, n)
    np.testing.assert_allclose(ab.phase * left.phase * dense(left.string, n), oracle, atol=1e-12)


def test_sum_arithmetic():
    a = PauliSum.from_labels([(1.0, "XI"), (2.0, "IZ")])
    b = PauliSum.from_labels([(-1.0, "XI")])
    s = a + b
    assert len(s) == 1 and s.coefficient(PauliString({1: "Z"})) == 2.0
    assert (2 * a).l1_norm() == 6.0
    assert a.relabel({0: 2, 1: 0}, n_qubits=3).coefficient(PauliString({2: "X"})) == 1.0
