import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vqlab import codes, qsim
from vqlab.codes import SignedPolynomialCode, SignedPolynomialEncoder
from vqlab.pauli import PauliOperator, QuditPauli, commutes

P = PauliOperator.from_label


# ---- stabilizer tables


@pytest.mark.parametrize("code", [codes.FIVE_QUBIT, codes.STEANE], ids=lambda c: c.name)
def test_tables_commute_and_stabilize(code, rng):
    assert all(commutes(a, b) for a, b in itertools.combinations(code.generators, 2))
    for state in (code.logical_zero(), code.random_codeword(rng)):
        assert codes.codespace_check(code, state)
        for g in code.generators:
            assert qsim.expectation(state, g.to_matrix()) == pytest.approx(1, abs=1e-9)


def test_product_state_is_not_a_codeword():
    assert not codes.codespace_check(codes.FIVE_QUBIT, qsim.zero_state(5))


def test_printed_steane_row_anticommutes():
    assert not commutes(P(codes.STEANE_PRINTED_G5), P("IIIZZZZ"))
    with pytest.raises(ValueError):
        codes._code("printed", codes.STEANE_LABELS[:4] + (codes.STEANE_PRINTED_G5, codes.STEANE_LABELS[5]))


def test_rotated_generators_commute_like_the_originals():
    gens = codes.rotated_generators()
    for a, b in itertools.combinations(gens, 2):
        np.testing.assert_allclose(a @ b, b @ a, atol=1e-12)
    for g in gens:
        np.testing.assert_allclose(g @ g, np.eye(32), atol=1e-12)


def test_rotated_sum_values(rng):
    assert codes.rotated_generator_sum(qsim.zero_state(5)) < 4 * math.sqrt(2)
    mixed = qsim.DensityMatrix.maximally_mixed(5)
    assert sum(qsim.expectation(mixed, g) for g in codes.rotated_generators()) == pytest.approx(0, abs=1e-12)
    # operator-norm ceiling: four unit-norm observables cannot exceed 4
    for _ in range(10):
        assert codes.rotated_generator_sum(qsim.random_state(5, rng)) <= 4 + 1e-9


# ---- 3-qubit flip code


def test_flip3_syndromes(rng):
    psi = qsim.StateVector.from_amplitudes([0.6, 0.8j])
    assert codes.flip3_cycle(psi, 3, rng)[0] == (1, -1)
    assert codes.flip3_cycle(psi, None, rng)[0] == (1, 1)


@pytest.mark.parametrize("error", [None, 1, 2, 3])
def test_flip3_corrects_single_flips(error, rng):
    psi = qsim.random_state(1, rng)
    _, corrected = codes.flip3_cycle(psi, error, rng)
    assert qsim.fidelity(corrected, codes.flip3_encode(psi)) == pytest.approx(1, abs=1e-12)
    with pytest.raises(ValueError):
        codes.flip3_cycle(psi, 4, rng)


# ---- signed polynomial code


def test_encoding_branches_for_zero():
    code = SignedPolynomialCode(5, 1)
    reg = codes.signed_poly_encode(code, 0)
    support = np.flatnonzero(np.abs(reg.amplitudes) > 1e-12)
    assert len(support) == 5
    np.testing.assert_allclose(np.abs(reg.amplitudes[support]) ** 2, 0.2, atol=1e-12)


def test_codewords_are_orthogonal():
    code = SignedPolynomialCode(5, 1, sign_key=(1, -1, 1))
    words = [codes.signed_poly_encode(code, i).amplitudes for i in range(5)]
    for a, b in itertools.combinations(words, 2):
        assert abs(np.vdot(a, b)) < 1e-10


def test_root_convention_is_not_a_code():
    code = SignedPolynomialCode(5, 1, convention=codes.ROOT_AT_LOGICAL)
    polys = [set(code.polynomials(i)) for i in range(5)]
    zero = (0, 0)
    assert all(zero in p for p in polys)
    with pytest.raises(ValueError):
        SignedPolynomialEncoder(code)


def test_bad_parameters():
    with pytest.raises(ValueError):
        SignedPolynomialCode(4, 1)
    with pytest.raises(ValueError):
        SignedPolynomialCode(3, 1)
    with pytest.raises(ValueError):
        SignedPolynomialCode(5, 1, sign_key=(1, 2, 1))


@given(st.lists(st.sampled_from([1, -1]), min_size=3, max_size=3), st.integers(0, 2**32 - 1))
def test_encode_decode_roundtrip(key, seed):
    enc = SignedPolynomialEncoder(SignedPolynomialCode(5, 1, sign_key=tuple(key)))
    rng = np.random.default_rng(seed)
    psi = rng.normal(size=5) + 1j * rng.normal(size=5)
    psi /= np.linalg.norm(psi)
    data = np.zeros(125, dtype=complex)
    data[::25] = psi
    back = enc.decode(enc.encode(data))
    np.testing.assert_allclose(back, data, atol=1e-12)  # flags all zero with probability 1


def test_identity_attack_is_harmless():
    code = SignedPolynomialCode(5, 1)
    assert codes.signed_poly_auth_experiment(code, QuditPauli.identity(5, 3)) == 0.0


def test_single_qudit_x_detection_matches_dense_oracle():
    code = SignedPolynomialCode(5, 1)
    word = codes.signed_poly_encode(code, 0).amplitudes
    attack = QuditPauli.single(5, 3, 0, 1, 0)
    hit = attack.apply(word)
    space = np.stack([codes.signed_poly_encode(code, i).amplitudes for i in range(5)], axis=1)
    accept_dense = float(np.linalg.norm(space.conj().T @ hit) ** 2)
    dec = SignedPolynomialEncoder(code).decode(hit)
    accept_flags = float(np.sum(np.abs(dec[::25][:5]) ** 2))
    assert accept_flags == pytest.approx(accept_dense, abs=1e-12)
    assert accept_dense == pytest.approx(0.0, abs=1e-12)  # a degree-1 code detects any single shift


def test_support_restricted_pads_equal_full_average():
    code = SignedPolynomialCode(5, 1)
    for attack in (QuditPauli.single(5, 3, 1, 2, 3), QuditPauli(5, 3, (0, 1, 2), (0, 0, 0))):
        fast = codes.signed_poly_auth_experiment(code, attack)
        full = codes.signed_poly_auth_experiment(code, attack, support=range(3))
        assert fast == pytest.approx(full, abs=1e-12)


def test_sampled_estimate_agrees_with_exhaustive(rng):
    code = SignedPolynomialCode(5, 1)
    attack = QuditPauli(5, 3, (0, 1, 2), (0, 0, 0))
    exact = codes.signed_poly_auth_experiment(code, attack)
    est = codes.signed_poly_auth_experiment(code, attack, trials=4000, rng=rng)
    assert exact == pytest.approx(0.5, abs=1e-12)
    assert abs(est - exact) < 0.05


def _all_pauli_values(code):
    """Accept-and-incorrect for every 3-qudit Pauli, averaged over sign keys (exact, vectorized)."""
    q, t = code.q, code.t
    digits = np.array(list(itertools.product(range(q), repeat=t)))
    weights = q ** np.arange(t - 1, -1, -1)
    omega = np.exp(2j * np.pi * np.arange(q) / q)
    phase = omega[(digits @ digits.T) % q]  # [z, d]
    data = np.zeros(q**t, dtype=complex)
    data[0] = 1
    total = np.zeros((q**t, q**t))
    for key in itertools.product((1, -1), repeat=t):
        enc = SignedPolynomialEncoder(code.with_key(key))
        v = enc.encode(data)
        stack = np.empty((q**t, q**t, q**t), dtype=complex)
        for a in range(q**t):
            dest = ((digits + digits[a]) % q) @ weights
            stack[a][:, dest] = phase * v
        dec = enc.decode(stack.reshape(-1, q**t)).reshape(q**t, q**t, q**t)
        acc = dec[:, :, :: q ** (t - 1)]
        total += np.sum(np.abs(acc[:, :, 1:]) ** 2, axis=2)
    return total / 2**t  # [x-powers index, z-powers index]


def test_scheme_bound_over_full_pauli_group():
    code = SignedPolynomialCode(5, 1)
    values = _all_pauli_values(code)
    values[0, 0] = 0.0
    assert values.max() <= 2.0**-code.d + 1e-9
    # cross-check a few entries against the protocol-level experiment
    digits = list(itertools.product(range(5), repeat=3))
    for a, b in [(7, 0), (1, 31), (62, 99)]:
        attack = QuditPauli(5, 3, digits[a], digits[b])
        assert values[a, b] == pytest.approx(codes.signed_poly_auth_experiment(code, attack), abs=1e-9)


def test_weight_two_counterexample_to_per_attack_quarter_bound():
    code = SignedPolynomialCode(5, 1)
    attack = QuditPauli(5, 3, (0, 1, 2), (0, 0, 0))
    assert codes.signed_poly_auth_experiment(code, attack) == pytest.approx(0.5, abs=1e-12)
