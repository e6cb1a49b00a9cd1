"""Acceptance criteria 1-12, one printed PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v``. Each test prints its line
straight to the terminal before asserting, so a failing criterion still
reports the measured value.
"""

import itertools
import math

import numpy as np
import pytest

from vqlab import circuit as circ
from vqlab import codes, entbased, mbqc, prepsend, qsim, recvmeas, stats
from vqlab.adversary import AttackSpec
from vqlab.pauli import PauliOperator, all_paulis, commutes, random_clifford, twirl_average, QuditPauli


@pytest.fixture
def report(capsys):
    def emit(number: int, ok: bool, detail: str) -> bool:
        with capsys.disabled():
            print(f"\n[criterion {number:2d}] {'PASS' if ok else 'FAIL'}: {detail}")
        return ok

    return emit


def test_criterion_01_twirls(report):
    rng = np.random.default_rng(101)
    worst_c1 = 0.0
    p1s = list(all_paulis(1))
    for _ in range(5):
        rho = qsim.random_density(1, rng)
        for a, b in itertools.permutations(p1s, 2):
            worst_c1 = max(worst_c1, np.abs(twirl_average(rho, a, b, "clifford")).max())
    p2s = list(all_paulis(2))
    worst_c2 = 0.0
    for _ in range(100):
        i, j = rng.choice(len(p2s), size=2, replace=False)
        rho = qsim.random_density(2, rng)
        worst_c2 = max(worst_c2, np.abs(twirl_average(rho, p2s[i], p2s[j], "clifford")).max())
    worst_p = 0.0
    for n in (1, 2):
        rho = qsim.random_density(n, rng)
        for a, b in itertools.permutations(list(all_paulis(n)), 2):
            worst_p = max(worst_p, np.abs(twirl_average(rho, a, b, "pauli")).max())
    ok = max(worst_c1, worst_c2, worst_p) < 1e-10
    assert report(1, ok, f"Clifford n=1 {worst_c1:.1e}, Clifford n=2 (100 pairs) {worst_c2:.1e}, Pauli n<=2 {worst_p:.1e}")


def test_criterion_02_one_time_pad(report):
    rng = np.random.default_rng(102)
    worst = 0.0
    for n in (1, 2, 3):
        for _ in range(3):
            rho = qsim.random_density(n, rng)
            worst = max(worst, np.abs(qsim.one_time_pad_average(rho) - np.eye(2**n) / 2**n).max())
    assert report(2, worst < 1e-12, f"max |avg - I/2^n| over n<=3 = {worst:.1e}")


def test_criterion_03_blindness(report):
    pa = mbqc.chain_pattern([1, 6], is_input=False, readout=True)
    pb = mbqc.chain_pattern([3, 2], is_input=False, readout=True)
    assert pa.num_qubits == pb.num_qubits == 3 and pa != pb
    td = prepsend.blindness_check(pa, pb, average_r=True)
    assert report(3, td < 1e-9, f"prover-view trace distance {td:.1e} between two 3-qubit chains")


def test_criterion_04_vubqc(report):
    pattern = mbqc.chain_pattern([], is_input=False, readout=True)
    n = len(pattern.order) + 3
    assert n == 4
    honest = [prepsend.vubqc_run(pattern, rng=np.random.default_rng(s), seed=s).accepted for s in range(20)]
    ok = all(honest)
    lines = []
    trials = 10_000
    bound = 1 - 1 / n
    for pos, letter in itertools.product(range(n), "XYZ"):
        attack = AttackSpec(kind="pauli", pauli=letter, qubit=pos)
        expected = prepsend.vubqc_detection_oracle(pattern, attack)
        est = prepsend.security_experiment("vubqc", attack, trials, np.random.default_rng(400 + 3 * pos + "XYZ".index(letter)),
                                           instance={"pattern": pattern})
        reject = 1 - est.accept.rate
        good = stats.within_sigma(reject, expected, trials) and stats.below_bound(est.incorrect_accept.rate, bound, trials)
        ok &= good
        lines.append(f"{letter}@{pos}: reject {reject:.4f} vs {expected:.4f}, bad {est.incorrect_accept.rate:.4f}")
    assert report(4, ok, f"honest 20/20={all(honest)}; " + "; ".join(lines))


def test_criterion_05_test_or_compute(report):
    gates = circ.parse_circuit("X 0; H 1; CNOT 0 1; H 1")
    honest = {}
    for run_type in ("x-test", "z-test"):
        outs = [prepsend.toc_run(gates, run_type, rng=np.random.default_rng(s)) for s in range(50)]
        honest[run_type] = all(o.accepted for o in outs)
    ok = all(honest.values())
    trials = 10_000
    parts = []
    for k, letter in enumerate("XYZ"):
        attack = AttackSpec(kind="pauli", pauli=letter, qubit=0, round=-1)
        est = prepsend.security_experiment("toc", attack, trials, np.random.default_rng(500 + k),
                                           instance={"gates": gates, "run_type": "random"})
        good = stats.below_bound(est.incorrect_accept.rate, 2 / 3, trials)
        ok &= good
        parts.append(f"{letter}: bad {est.incorrect_accept.rate:.4f}")
    assert report(5, ok, f"honest tests {honest}; " + ", ".join(parts) + " (bound 2/3)")


def test_criterion_06_clifford_qas(report):
    worst = 0.0
    for p in all_paulis(2, include_identity=False):
        worst = max(worst, prepsend.cqas_exact(p))
    trials = 100_000
    attack = PauliOperator.from_label("XII")
    est = prepsend.cqas_sampled(attack, trials, np.random.default_rng(600))
    ok = worst <= 0.5 + 1e-12 and stats.below_bound(est.rate, 0.25, trials)
    assert report(6, ok, f"exact t=2 max {worst:.4f} (<= 0.5); sampled m=2 {est.rate:.4f} (<= 0.25 + 4 sigma)")


def test_criterion_07_signed_polynomial(report):
    code = codes.SignedPolynomialCode(q=5, d=1)
    assert code.t == 3
    worst = 0.0
    for pos, x, z in itertools.product(range(3), range(5), range(5)):
        if x == z == 0:
            continue
        worst = max(worst, codes.signed_poly_auth_experiment(code, QuditPauli.single(5, 3, pos, x, z)))
    assert report(7, worst <= 0.25 + 1e-9, f"max accept-and-incorrect over 72 single-qudit attacks = {worst:.2e}")


def test_criterion_08_measurement_only(report):
    pattern = mbqc.chain_pattern([2, 0], is_input=False, readout=True)
    trials = 10_000
    ok = True
    parts = []
    for k in (1, 3):
        honest = all(recvmeas.mo_run(pattern.graph, pattern, k, rng=np.random.default_rng(s)).accepted for s in range(20))
        rng = np.random.default_rng(800 + k)
        attack = AttackSpec(kind="corrupt_copy", pauli="Y", index=0, vertex=0)
        acc = sum(recvmeas.mo_run(pattern.graph, pattern, k, recvmeas.MOProver(attack), rng).accepted for _ in range(trials))
        rate, target = acc / trials, 1 / (2 * k + 1)
        good = honest and stats.within_sigma(rate, target, trials)
        ok &= good
        parts.append(f"k={k}: honest {honest}, corrupt-one-copy {rate:.4f} vs {target:.4f}")
    assert report(8, ok, "; ".join(parts))


TOY_ACCEPT = ["X 0", "X 1; CNOT 1 0", "H 0; Z 0; H 0"]
TOY_REJECT = ["I 0", "X 0; X 0", "CNOT 1 0; X 1"]


def test_criterion_09_post_hoc(report):
    zero = 0.0
    for text in TOY_ACCEPT + TOY_REJECT:
        gates = circ.parse_circuit(text)
        x = [0] * max(2, circ.width(gates))
        h = recvmeas.build_clock_hamiltonian(gates, x)
        psi = recvmeas.fk_state(gates, x)
        zero = max(zero, *(abs(h.energy(psi, part)) for part in ("in", "clock", "prop")))
    classified = True
    for text, accepting in [(t, True) for t in TOY_ACCEPT] + [(t, False) for t in TOY_REJECT]:
        gates = circ.parse_circuit(text)
        assert len(gates) <= 3
        x = [0] * max(2, circ.width(gates))
        h = recvmeas.build_clock_hamiltonian(gates, x)
        e0 = h.ground_energy()
        classified &= (e0 <= h.a) if accepting else (e0 >= h.b)
    gates = circ.parse_circuit("X 1; CNOT 0 1; H 1")
    h = recvmeas.build_clock_hamiltonian(gates, [0, 0])
    state = recvmeas.fk_state(gates, [0, 0])
    samples = 100_000
    est = recvmeas.estimate_energy(h, [(state, samples)], np.random.default_rng(900))
    exact = h.energy(state)
    sigma = (est.high - est.low) / (2 * 1.959964)
    close = abs(est.value - exact) <= 4 * sigma
    ok = zero < 1e-9 and classified and close
    assert report(9, ok, f"FK residual {zero:.1e}; classification {classified}; estimator {est.value:.4f} vs dense {exact:.4f}")


def test_criterion_10_chsh(report):
    classical = entbased.classical_chsh_bound()
    games = 100_000
    res = entbased.chsh_campaign("ideal", games, np.random.default_rng(1000))
    quantum_ok = stats.within_sigma(res.rate, entbased.TSIRELSON, games)
    rng = np.random.default_rng(1001)
    found = {}
    for label in entbased.OBSERVABLES:
        for _ in range(8):
            system = entbased.TwoProverSystem.bell_pair()
            _, state = entbased.remote_prepare(system, "A", entbased.ObservableSpec(label), rng)
            name = entbased.identify_resource(state, tol=1e-9)
            if name is not None:
                found[name] = max(found.get(name, 0.0), qsim.fidelity(state, entbased.resource_states()[name]))
    all_states = set(found) == set(entbased.resource_states()) and min(found.values()) >= 1 - 1e-9
    ok = abs(classical - 0.75) < 1e-12 and quantum_ok and all_states
    assert report(10, ok, f"classical max {classical:.4f}; quantum {res.rate:.4f} vs {entbased.TSIRELSON:.4f}; "
                  f"resource states reached {len(found)}/{len(entbased.resource_states())}")


def _stabilizes(gens, tol=1e-9):
    dim = gens[0].shape[0]
    proj = np.eye(dim, dtype=complex)
    for g in gens:
        proj = proj @ (np.eye(dim) + g) / 2
    vals, vecs = np.linalg.eigh((proj + proj.conj().T) / 2)
    space = vecs[:, vals > 0.5]
    if space.shape[1] == 0:
        return False
    return all(np.allclose(g @ space, space, atol=tol) for g in gens)


def _pairwise_commute(gens):
    return all(np.allclose(a @ b, b @ a, atol=1e-12) for a, b in itertools.combinations(gens, 2))


def test_criterion_11_codes(report):
    rng = np.random.default_rng(1100)
    sums = [codes.rotated_generator_sum(codes.FIVE_QUBIT.random_codeword(rng)) for _ in range(5)]
    dev = max(abs(s - 4 * math.sqrt(2)) for s in sums)
    tables = {
        "five-qubit": [PauliOperator.from_label(s).to_matrix() for s in codes.FIVE_QUBIT_LABELS],
        "rotated": codes.rotated_generators(),
        "steane": [PauliOperator.from_label(s).to_matrix() for s in codes.STEANE_LABELS],
    }
    tables_ok = all(_pairwise_commute(g) and _stabilizes(g) for g in tables.values())
    for code in (codes.FIVE_QUBIT, codes.STEANE):
        tables_ok &= codes.codespace_check(code, code.logical_zero())
    ok = dev < 1e-9 and tables_ok
    assert report(11, ok, f"rotated sum on codewords {sums[0]:.6f} (target {4 * math.sqrt(2):.6f}); "
                  f"generator tables commute and stabilize: {tables_ok}")


def test_criterion_12_oracle_equivalence(report):
    rng = np.random.default_rng(1200)
    worst = 0.0
    for _ in range(50):
        width = int(rng.integers(1, mbqc.MAX_BRICK_WIDTH + 1))
        gates = circ.random_circuit(width, 4, rng, gate_set=mbqc.BRICK_GATES)
        pattern = mbqc.compile_brickwork(gates, width)
        counts = mbqc.sample_pattern_outputs(pattern, rng, runs=200, shots_per_run=500, input_state=qsim.zero_state(width))
        assert counts.sum() == 100_000
        tv = circ.total_variation(counts / counts.sum(), circ.output_distribution(gates, width))
        worst = max(worst, tv)
    assert report(12, worst <= 0.02, f"max TV over 50 circuits at 10^5 samples = {worst:.4f}")
