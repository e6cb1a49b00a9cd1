import itertools
from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vqlab import qsim
from vqlab.pauli import (
    CliffordElement,
    PauliOperator,
    QuditPauli,
    all_paulis,
    all_qudit_paulis,
    commutes,
    conjugate,
    dense_twirl_average,
    enumerate_cliffords,
    pauli_decompose,
    qudit_twirl_average,
    random_clifford,
    twirl_average,
)

P = PauliOperator.from_label
labels = st.text(alphabet="IXYZ", min_size=1, max_size=3)


def test_products():
    assert (P("X") * P("Z")).label() == "-iY"
    for lab in ("X", "Y", "Z", "XZ", "YY"):
        prod = P(lab) * P(lab)
        assert prod.is_identity() and prod.sign() == 1
    assert (P("XI") * P("IZ")).label() == "+XZ"


@given(labels, labels)
def test_product_matches_matrices(a, b):
    n = min(len(a), len(b))
    pa, pb = P(a[:n]), P(b[:n])
    np.testing.assert_allclose((pa * pb).to_matrix(), pa.to_matrix() @ pb.to_matrix(), atol=1e-12)
    comm = np.allclose(pa.to_matrix() @ pb.to_matrix(), pb.to_matrix() @ pa.to_matrix())
    assert commutes(pa, pb) == comm


def test_label_roundtrip_and_errors():
    for lab in ("+XYZ", "-iZ", "+iXX", "-I"):
        assert P(lab).label() == lab
    with pytest.raises(ValueError):
        P("XQ")


def test_conjugation_examples():
    h = CliffordElement.from_gate("H", [0], 1)
    assert conjugate(h, P("X")).label() == "+Z"
    cnot = CliffordElement.from_gate("CNOT", [0, 1], 2)
    assert conjugate(cnot, P("XI")).label() == "+XX"
    s = CliffordElement.from_gate("S", [0], 1)
    assert conjugate(s, P("X")).label() == "+Y"
    # dense oracle for the same three
    for c, lab in ((h, "X"), (cnot, "XI"), (s, "X")):
        u = c.to_matrix()
        np.testing.assert_allclose(u @ P(lab).to_matrix() @ u.conj().T, conjugate(c, P(lab)).to_matrix(), atol=1e-12)


@pytest.mark.parametrize("n", [1, 2])
def test_conjugate_matches_dense_on_generators(n, rng):
    group = enumerate_cliffords(n)
    for c in [group[i] for i in rng.choice(len(group), min(40, len(group)), replace=False)]:
        u = c.to_matrix()
        for q, letter in itertools.product(range(n), "XZ"):
            p = PauliOperator.single(n, letter, q)
            np.testing.assert_allclose(u @ p.to_matrix() @ u.conj().T, conjugate(c, p).to_matrix(), atol=1e-12)


def test_group_sizes():
    assert len(enumerate_cliffords(1)) == 24
    assert len(enumerate_cliffords(2)) == 11520
    assert len({c.key() for c in enumerate_cliffords(2)}) == 11520
    with pytest.raises(ValueError):
        enumerate_cliffords(3)


def test_n1_classes_match_brute_force():
    # distinct conjugation actions on {X, Z} of words in H and S
    h, s = qsim.GATES["H"], qsim.GATES["S"]
    actions = set()
    frontier = [np.eye(2, dtype=complex)]
    for _ in range(8):
        nxt = []
        for u in frontier:
            for g in (h, s):
                w = g @ u
                key = CliffordElement.from_matrix(w).key()
                if key not in actions:
                    actions.add(key)
                    nxt.append(w)
        frontier = nxt
    assert actions == {c.key() for c in enumerate_cliffords(1)}


def test_random_clifford_uniform_n1(rng):
    draws = 100_000
    counts = Counter(random_clifford(1, rng).key() for _ in range(draws))
    assert len(counts) == 24
    p = 1 / 24
    sigma = np.sqrt(p * (1 - p) / draws)
    assert all(abs(c / draws - p) <= 4 * sigma for c in counts.values())


@given(st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_random_clifford_is_symplectic(n, seed):
    c = random_clifford(n, np.random.default_rng(seed))  # constructor enforces the invariant
    img = conjugate(c, P("X" * n))
    assert img.is_hermitian() and img.num_qubits == n


def test_twirl_examples(rng):
    zero = qsim.zero_state(1).to_density()
    assert np.abs(twirl_average(zero, P("X"), P("Z"), "clifford")).max() < 1e-12
    rho = qsim.random_density(2, rng)
    assert np.abs(twirl_average(rho, P("XI"), P("ZY"), "pauli")).max() < 1e-12
    np.testing.assert_allclose(twirl_average(rho, P("II"), P("II")), rho.matrix, atol=1e-12)
    with pytest.raises(ValueError):
        twirl_average(qsim.random_density(3, rng), P("XII"), P("XII"), "clifford")


def test_clifford_twirl_annihilation_n1(rng):
    paulis = list(all_paulis(1))
    for _ in range(20):
        rho = qsim.random_density(1, rng)
        for a, b in itertools.permutations(paulis, 2):
            assert np.abs(twirl_average(rho, a, b, "clifford")).max() < 1e-10


def test_pauli_twirl_annihilation(rng):
    for n in (1, 2):
        rho = qsim.random_density(n, rng)
        for a, b in itertools.permutations(list(all_paulis(n)), 2):
            assert np.abs(twirl_average(rho, a, b, "pauli")).max() < 1e-10


def test_twirl_matches_dense_reference(rng):
    rho = qsim.random_density(2, rng)
    us = [c.to_matrix() for c in enumerate_cliffords(2)]
    for a, b in [(P("XZ"), P("XZ")), (P("YI"), P("IZ")), (P("ZZ"), P("ZZ"))]:
        np.testing.assert_allclose(twirl_average(rho, a, b), dense_twirl_average(rho, a, b, us), atol=1e-12)


def test_clifford_decoherence(rng):
    # averaging C^dag P C rho C^dag P C over C_1 gives the uniform nonidentity-Pauli mixture
    rho = qsim.random_density(1, rng)
    nonid = [p.to_matrix() for p in all_paulis(1, include_identity=False)]
    mix = sum(q @ rho.matrix @ q for q in nonid) / 3
    for lab in ("X", "Y", "Z"):
        np.testing.assert_allclose(twirl_average(rho, P(lab), P(lab)), mix, atol=1e-10)


def test_decompose_roundtrip(rng):
    m = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    coeffs = pauli_decompose(m)
    back = sum(c * P(k).to_matrix() for k, c in coeffs.items())
    np.testing.assert_allclose(back, m, atol=1e-12)


def test_qudit_paulis(rng):
    a = QuditPauli.single(5, 2, 0, 1, 2)
    assert a.weight() == 1
    np.testing.assert_allclose((a * a.dagger()).to_matrix(), np.eye(25), atol=1e-12)
    rho = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    rho = rho @ rho.conj().T
    rho /= np.trace(rho)
    ps = list(all_qudit_paulis(5, 1))
    assert len(ps) == 25
    assert np.abs(qudit_twirl_average(rho, ps[1], ps[7])).max() < 1e-12
