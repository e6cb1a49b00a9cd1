import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vqlab import mbqc, prepsend, qsim, recvmeas
from vqlab.adversary import AttackSpec, kraus_pauli_decompose, make_prover, pauli_reconstruct
from vqlab.protocol import (
    PROVER,
    VERIFIER,
    HidingParams,
    PauliFrame,
    ProtocolMessage,
    Transcript,
    trial_rng,
)

S2 = 1 / np.sqrt(2)
PREPSEND = ("childs", "ubqc", "vubqc", "toc", "cqas")


# ---- attack specs


def test_attack_spec_validation():
    with pytest.raises(ValueError):
        AttackSpec(kind="teleport")
    with pytest.raises(ValueError):
        AttackSpec(kind="pauli", pauli="Q")
    with pytest.raises(ValueError):
        AttackSpec(kind="unitary", matrix=((1, 1), (0, 1)), qubits=(0,))
    with pytest.raises(ValueError):
        AttackSpec(kind="wrong_angle", offset=8)
    with pytest.raises(ValueError):
        AttackSpec(kind="pauli", pauli="X", round=-2)
    with pytest.raises(ValueError):
        AttackSpec.from_dict({"kind": "pauli", "pauli": "X", "colour": 1})


def test_attack_spec_dict_roundtrip():
    h = qsim.GATES["H"]
    spec = AttackSpec(kind="unitary", matrix=tuple(map(tuple, h)), qubits=(1,), round=2)
    back = AttackSpec.from_dict(json.loads(json.dumps(spec.to_dict())))
    np.testing.assert_allclose(np.asarray(back.matrix), h, atol=1e-12)
    assert back.qubits == (1,) and back.round == 2
    assert AttackSpec.from_dict({"kind": "pauli", "pauli": "xz"}).pauli == "XZ"


def test_flip_masks():
    spec = AttackSpec(kind="flip_reports", mask=0b101)
    assert [spec.flips(k) for k in range(4)] == [True, False, True, False]
    assert all(AttackSpec(kind="flip_reports", mask=-1).flips(k) for k in range(10))


def test_multi_letter_pauli_ops():
    ops = AttackSpec(kind="pauli", pauli="XIZ", qubit=2).local_ops()
    assert [q for q, _ in ops] == [2, 4]


# ---- Pauli decomposition of deviations


def test_decompose_identity_and_hadamard():
    assert kraus_pauli_decompose(np.eye(2)) == pytest.approx({"I": 1, "X": 0, "Y": 0, "Z": 0})
    assert kraus_pauli_decompose(qsim.GATES["H"]) == pytest.approx({"I": 0, "X": S2, "Y": 0, "Z": S2})


def test_decompose_x_rotation():
    u = np.cos(np.pi / 8) * np.eye(2) - 1j * np.sin(np.pi / 8) * qsim.GATES["X"]
    c = kraus_pauli_decompose(u)
    assert c["I"] == pytest.approx(np.cos(np.pi / 8)) and c["X"] == pytest.approx(-1j * np.sin(np.pi / 8))


@given(st.integers(1, 2), st.integers(0, 2**32 - 1))
def test_decomposition_of_unitaries(n, seed):
    u = qsim.random_unitary(2**n, np.random.default_rng(seed))
    c = kraus_pauli_decompose(u)
    np.testing.assert_allclose(pauli_reconstruct(c), u, atol=1e-12)
    assert sum(abs(a) ** 2 for a in c.values()) == pytest.approx(1)


def test_decomposition_limits():
    with pytest.raises(ValueError):
        kraus_pauli_decompose(np.eye(8))
    with pytest.raises(ValueError):
        kraus_pauli_decompose(np.eye(3))


# ---- prover factory


def test_make_prover_checks_support():
    with pytest.raises(ValueError):
        make_prover("nope")
    with pytest.raises(ValueError):
        make_prover("posthoc", AttackSpec(kind="flip_reports", mask=1))
    assert isinstance(make_prover("mo"), recvmeas.MOProver)


DIRECT = {"childs": prepsend.ChildsProver, "ubqc": prepsend.MBQCProver, "vubqc": prepsend.MBQCProver,
          "toc": prepsend.ToCProver, "cqas": prepsend.CQASProver}


@pytest.mark.parametrize("protocol", PREPSEND)
def test_factory_honest_prover_matches_default(protocol):
    inst = prepsend.default_instance(protocol)
    for seed in range(20):
        a = prepsend.run_protocol(protocol, inst, make_prover(protocol), trial_rng(seed, 0), seed)
        b = prepsend.run_protocol(protocol, inst, DIRECT[protocol](), trial_rng(seed, 0), seed)
        c = prepsend.run_protocol(protocol, inst, make_prover(protocol, AttackSpec(kind="pauli", pauli="I")),
                                  trial_rng(seed, 0), seed)
        ja, jb, jc = (o.transcript.to_jsonl(reveal=True) for o in (a, b, c))
        assert ja == jb == jc


@pytest.mark.parametrize("protocol,qubit,attack_round", [("ubqc", 2, 4), ("toc", 0, 5), ("childs", 0, 3)])
def test_attack_leaves_earlier_rounds_untouched(protocol, qubit, attack_round):
    inst = prepsend.default_instance(protocol)
    attack = AttackSpec(kind="pauli", pauli="Y", qubit=qubit, round=attack_round)
    changed = 0
    for seed in range(20):
        honest = prepsend.run_protocol(protocol, inst, make_prover(protocol), trial_rng(seed, 0), seed)
        bent = prepsend.run_protocol(protocol, inst, make_prover(protocol, attack), trial_rng(seed, 0), seed)
        early = lambda o: [m.to_dict() for m in o.transcript.messages if m.round < attack_round]  # noqa: E731
        assert early(honest) == early(bent)
        changed += honest.transcript.to_jsonl() != bent.transcript.to_jsonl()
    assert changed > 0


def test_attack_on_a_measured_vertex_never_fires():
    inst = prepsend.default_instance("ubqc")
    late = AttackSpec(kind="pauli", pauli="X", qubit=0, round=4)
    for seed in range(5):
        a = prepsend.run_protocol("ubqc", inst, make_prover("ubqc"), trial_rng(seed, 0), seed)
        b = prepsend.run_protocol("ubqc", inst, make_prover("ubqc", late), trial_rng(seed, 0), seed)
        assert a.transcript.to_jsonl() == b.transcript.to_jsonl()


# ---- protocol plumbing


def test_message_validation():
    ProtocolMessage(VERIFIER, "angle-request", 0, {"vertex": 0, "angle": 7})
    with pytest.raises(ValueError):
        ProtocolMessage("referee", "graph", 0, {})
    with pytest.raises(ValueError):
        ProtocolMessage(VERIFIER, "shout", 0, {})
    with pytest.raises(ValueError):
        ProtocolMessage(VERIFIER, "angle-request", 0, {"angle": 8})
    with pytest.raises(ValueError):
        ProtocolMessage(PROVER, "outcome-bit", 0, {"bit": 2})


def test_transcript_jsonl_format():
    out = prepsend.ubqc_run(mbqc.chain_pattern([1], is_input=False, readout=True), seed=3)
    lines = out.transcript.to_jsonl().splitlines()
    rows = [json.loads(line) for line in lines]
    assert rows[0] == {"header": {"protocol": "ubqc", "seed": 3}}
    assert all(set(r) == {"round", "sender", "kind", "payload"} for r in rows[1:])
    assert rows[-1]["kind"] == "accept-reject"
    rounds = [r["round"] for r in rows[1:] if r["sender"] == VERIFIER]
    assert rounds == sorted(rounds)
    revealed = out.transcript.to_jsonl(reveal=True).splitlines()
    assert len(revealed) == len(lines) + 1 and "theta" in json.loads(revealed[-1])["hidden"]


def test_replies_share_the_verifier_round():
    tr = Transcript("demo")
    msg = tr.send("measure-request")
    rep = tr.reply(msg, "outcome-bits", {"bits": [0, 1]})
    assert rep.round == msg.round == 0 and tr.send("graph").round == 1


def test_hiding_params_drop_empty_fields():
    assert HidingParams().to_dict() == {}
    assert HidingParams(trap_position=2).to_dict() == {"trap_position": 2}


def test_frame_tracks_cliffords(rng):
    for gate, ts in [("H", (0,)), ("S", (1,)), ("CNOT", (0, 1)), ("CZ", (1, 0)), ("SWAP", (0, 1))]:
        frame = PauliFrame.random(2, rng)
        psi = qsim.random_state(2, rng)
        padded = qsim.apply_circuit(psi, frame.operator_gates())
        moved = qsim.apply_unitary(padded, gate, ts)
        frame.apply(gate, ts)
        back = qsim.apply_circuit(moved, frame.undo_gates())
        assert qsim.fidelity(back, qsim.apply_unitary(psi, gate, ts)) == pytest.approx(1, abs=1e-12)
    with pytest.raises(ValueError):
        PauliFrame.zero(1).apply("T", (0,))


def test_trial_streams_are_independent_and_reproducible():
    a = trial_rng(5, 0).integers(0, 2**32, 4)
    assert np.array_equal(a, trial_rng(5, 0).integers(0, 2**32, 4))
    assert not np.array_equal(a, trial_rng(5, 1).integers(0, 2**32, 4))
    assert not np.array_equal(a, trial_rng(5, 0, stream=1).integers(0, 2**32, 4))
