import json
from collections import Counter

import numpy as np
import pytest

from vqlab import circuit as circ
from vqlab import mbqc, prepsend, qsim, stats
from vqlab.adversary import AttackSpec, make_prover
from vqlab.pauli import PauliOperator


def undo_frame(state, frame):
    """Strip X^x Z^z from the held register."""
    gates = [("X", (q,)) for q, b in enumerate(frame["x"]) if b]
    return qsim.apply_circuit(state, gates + [("Z", (q,)) for q, b in enumerate(frame["z"]) if b])


# ---- Childs


@pytest.mark.parametrize("text", ["H 0; CNOT 0 1; S 1", "H 0; T 0; H 0; CNOT 0 1", "T 0; T 0; H 1; T 1"])
def test_childs_frame_is_sound(text):
    gates = circ.parse_circuit(text)
    n_t = sum(g == "T" for g, _ in gates)
    for seed in range(40):
        psi = qsim.random_state(2, np.random.default_rng(1000 + seed))
        prover = prepsend.ChildsProver()
        out = prepsend.childs_run(gates, psi, prover, seed=seed)
        assert out.accepted and out.correct
        frame = out.transcript.hidden.extra["final_frame"]
        held = undo_frame(prover.state, frame)
        want = qsim.product_state([circ.simulate(gates, 2, psi)] + [qsim.zero_state(1)] * n_t) if n_t else circ.simulate(gates, 2, psi)
        assert qsim.fidelity(held, want) == pytest.approx(1, abs=1e-9)


def test_childs_output_distribution(rng):
    gates = circ.parse_circuit("H 0; T 0; H 0")
    ideal = circ.output_distribution(gates, 1)
    runs = 4000
    ones = sum(prepsend.childs_run(gates, qsim.zero_state(1), rng=rng).output_bits[0] for _ in range(runs))
    assert stats.within_sigma(ones / runs, ideal[1], runs)


def test_childs_rejects_non_clifford_t():
    with pytest.raises(ValueError):
        prepsend.childs_run([("CCNOT", (0, 1, 2))], qsim.zero_state(3), seed=0)


# ---- UBQC


def test_ubqc_matches_exact_distribution(rng):
    inst = prepsend.default_instance("ubqc")
    runs = 3000
    counts = Counter(prepsend.ubqc_run(inst["pattern"], rng=rng, reference=inst["reference"]).output_bits
                     for _ in range(runs))
    for bits, p in inst["reference"].items():
        assert stats.within_sigma(counts[bits] / runs, p, runs)


def test_ubqc_without_hiding_sends_base_angles():
    pattern = mbqc.chain_pattern([3, 5], is_input=False, readout=True)
    out = prepsend.ubqc_run(pattern, seed=4, hide=False)
    asked = [m.payload["angle"] for m in out.transcript.messages if m.kind == "angle-request"]
    bits = dict(zip(pattern.order, [m.payload["bit"] for m in out.transcript.messages if m.kind == "outcome-bit"]))
    seen = {}
    for v, a in zip(pattern.order, asked):
        assert a == pattern.corrected_angle(v, seen)
        seen[v] = bits[v]


def test_ubqc_replay_is_deterministic():
    pattern = mbqc.chain_pattern([1, 2], is_input=False, readout=True)
    a = prepsend.ubqc_run(pattern, seed=11).transcript.to_jsonl(reveal=True)
    b = prepsend.ubqc_run(pattern, seed=11).transcript.to_jsonl(reveal=True)
    assert a == b


def test_blindness_values():
    pa = mbqc.chain_pattern([1, 6], is_input=False, readout=True)
    pb = mbqc.chain_pattern([3, 2], is_input=False, readout=True)
    assert prepsend.blindness_check(pa, pa) == pytest.approx(0, abs=1e-12)
    assert prepsend.blindness_check(pa, pb) < 1e-9
    views = prepsend.prover_view(pa, (0, 1, 0))
    assert sum(np.trace(v).real for v in views) == pytest.approx(1)
    with pytest.raises(ValueError):
        prepsend.blindness_check(pa, mbqc.chain_pattern([1], is_input=False, readout=True))


# ---- VUBQC


def test_vubqc_honest_always_accepts():
    inst = prepsend.default_instance("vubqc")
    for seed in range(30):
        out = prepsend.vubqc_run(inst["pattern"], seed=seed)
        assert out.accepted and out.correct and out.output_bits == (0,)


@pytest.mark.parametrize("trap", range(5))
def test_vubqc_ring_layout(trap):
    lay = prepsend.RingLayout.place(2, trap)
    assert lay.size == 5 and trap not in lay.chain and len(set(lay.dummies) | set(lay.chain)) == 4


def test_wrong_angle_oracle_matches_sampling(rng):
    pattern = prepsend.default_instance("vubqc")["pattern"]
    attack = AttackSpec(kind="wrong_angle", offset=4)
    expected = prepsend.vubqc_detection_oracle(pattern, attack)
    est = prepsend.security_experiment("vubqc", attack, 2000, rng)
    assert expected > 0
    assert stats.within_sigma(1 - est.accept.rate, expected, 2000)


def test_vubqc_rejects_bad_patterns():
    with pytest.raises(ValueError):
        prepsend.vubqc_run(mbqc.chain_pattern([0, 0, 0], is_input=False, readout=True), seed=0)
    with pytest.raises(ValueError):
        prepsend.vubqc_run(mbqc.chain_pattern([0]), seed=0)


# ---- Test-or-Compute


def test_toc_expand_encodes_h_with_six_gadgets():
    ops = prepsend.toc_expand([("H", (0,))])
    assert [g for g, _ in ops].count("gadget") == 6 and [g for g, _ in ops].count("H") == 4
    with pytest.raises(ValueError):
        prepsend.toc_expand([("S", (0,))])


@pytest.mark.parametrize("text", ["T 0; H 0; CNOT 0 1", "H 0; T 0; T 0; H 0"])
def test_toc_computation_frame_is_sound(text):
    gates = circ.parse_circuit(text)
    for seed in range(30):
        prover = prepsend.ToCProver()
        out = prepsend.toc_run(gates, "computation", prover, seed=seed, num_qubits=2)
        assert out.accepted and out.correct
        held = undo_frame(prover.state, out.transcript.hidden.extra["final_frame"])
        assert qsim.fidelity(held, circ.simulate(gates, 2)) == pytest.approx(1, abs=1e-9)


@pytest.mark.parametrize("run_type", ["x-test", "z-test"])
def test_toc_honest_tests_accept(run_type):
    gates = circ.parse_circuit("T 0; H 0; CNOT 0 1; T 1")
    for seed in range(20):
        out = prepsend.toc_run(gates, run_type, seed=seed)
        assert out.accepted and out.correct is None


def test_toc_unknown_run_type():
    with pytest.raises(ValueError):
        prepsend.toc_run([("X", (0,))], "sideways", seed=0)


# ---- Clifford QAS


def test_cqas_honest_runs():
    gates = circ.parse_circuit("X 0; CNOT 0 1")
    for m in (1, 2):
        for seed in range(10):
            out = prepsend.cqas_run(gates, m, seed=seed)
            assert out.accepted and out.correct and out.output_bits == (1, 1)


def test_cqas_exact_values():
    for p in ("XI", "ZZ", "YX"):
        assert prepsend.cqas_exact(PauliOperator.from_label(p)) == pytest.approx(4 / 15)
    assert prepsend.cqas_exact(PauliOperator.from_label("X")) == pytest.approx(2 / 3)
    assert prepsend.cqas_mixing_value(1) == pytest.approx(2 / 3)
    assert prepsend.cqas_mixing_value(2) == pytest.approx(4 / 15)


def test_cqas_block_size_limit():
    with pytest.raises(ValueError):
        prepsend.cqas_run([("X", (0,))], 3, seed=0)


# ---- shared experiment driver


@pytest.mark.parametrize("protocol", ["childs", "ubqc", "vubqc", "toc", "cqas"])
def test_honest_security_experiment_has_no_bad_accepts(protocol, rng):
    est = prepsend.security_experiment(protocol, AttackSpec.honest(), 50, rng)
    assert est.incorrect_accept.successes == 0
    json.dumps(est.to_dict())


def test_security_experiment_rejects_zero_trials(rng):
    with pytest.raises(ValueError):
        prepsend.security_experiment("ubqc", AttackSpec.honest(), 0, rng)
    with pytest.raises(ValueError):
        make_prover("cqas", AttackSpec(kind="flip_reports", mask=1))
