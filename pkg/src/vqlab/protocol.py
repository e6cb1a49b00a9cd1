"""Shared plumbing for interactive protocols: messages, transcripts and provers.

Every verifier-to-prover instruction carries a round index (0, 1, ...). Provers
answer through ``Prover.respond`` and never see the verifier's hidden
parameters. Attacks live on the prover and fire when the matching round is
handled.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

VERIFIER = "verifier"
PROVER = "prover"

MESSAGE_KINDS = frozenset(
    {
        "qubit-batch",
        "qubit-return",
        "graph",
        "gate-request",
        "angle-request",
        "outcome-bit",
        "measure-request",
        "outcome-bits",
        "gadget-bit",
        "state-request",
        "term-request",
        "accept-reject",
    }
)


class ProtocolViolation(Exception):
    """Raised when a prover reply is malformed."""


@dataclass(frozen=True)
class ProtocolMessage:
    sender: str
    kind: str
    round: int
    payload: dict

    def __post_init__(self):
        if self.sender not in (VERIFIER, PROVER):
            raise ValueError(f"unknown sender {self.sender!r}")
        if self.kind not in MESSAGE_KINDS:
            raise ValueError(f"unknown message kind {self.kind!r}")
        if self.kind in ("outcome-bit", "gadget-bit") and self.payload.get("bit") not in (0, 1):
            raise ValueError(f"{self.kind} needs a 0/1 bit")
        if self.kind == "angle-request" and not 0 <= int(self.payload.get("angle", -1)) < 8:
            raise ValueError("angle must be an integer mod 8")

    def to_dict(self) -> dict:
        return {"round": self.round, "sender": self.sender, "kind": self.kind, "payload": _jsonable(self.payload)}


def _jsonable(x: Any) -> Any:
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, set, frozenset)):
        items = sorted(x) if isinstance(x, (set, frozenset)) else x
        return [_jsonable(v) for v in items]
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


@dataclass
class HidingParams:
    """Verifier secrets. Fields unused by a protocol stay empty."""

    theta: dict = field(default_factory=dict)
    r: dict = field(default_factory=dict)
    trap_position: int | None = None
    dummy_assignment: dict = field(default_factory=dict)
    pad_keys: list = field(default_factory=list)
    clifford_keys: list = field(default_factory=list)
    gadget_bits: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {}
        for k, v in self.__dict__.items():
            if k == "clifford_keys":
                v = [c.key() if hasattr(c, "key") else c for c in v]
            if v not in (None, {}, []):
                out[k] = _jsonable(v)
        return out


@dataclass
class ProtocolOutcome:
    accepted: bool
    output_bits: tuple = ()
    correct: bool | None = None
    transcript: "Transcript | None" = None

    @property
    def incorrect_and_accepted(self) -> bool:
        return bool(self.accepted and self.correct is False)


class Transcript:
    """Append-only message log with monotone verifier rounds."""

    def __init__(self, protocol: str, seed: int | None = None):
        self.protocol = protocol
        self.seed = seed
        self.messages: list[ProtocolMessage] = []
        self.hidden: HidingParams = HidingParams()
        self.outcome: ProtocolOutcome | None = None
        self._next_round = 0

    def send(self, kind: str, payload: dict | None = None) -> ProtocolMessage:
        msg = ProtocolMessage(VERIFIER, kind, self._next_round, dict(payload or {}))
        self._next_round += 1
        self.messages.append(msg)
        return msg

    def reply(self, to: ProtocolMessage, kind: str, payload: dict | None = None) -> ProtocolMessage:
        msg = ProtocolMessage(PROVER, kind, to.round, dict(payload or {}))
        self.messages.append(msg)
        return msg

    def note(self, kind: str, payload: dict | None = None) -> ProtocolMessage:
        """Verifier-side message that does not open a new round (e.g. the verdict)."""
        msg = ProtocolMessage(VERIFIER, kind, self._next_round, dict(payload or {}))
        self.messages.append(msg)
        return msg

    def finish(self, outcome: ProtocolOutcome) -> ProtocolOutcome:
        self.note("accept-reject", {"accepted": bool(outcome.accepted), "output": list(outcome.output_bits)})
        outcome.transcript = self
        self.outcome = outcome
        return outcome

    def lines(self, reveal: bool = False) -> list[str]:
        head = {"protocol": self.protocol, "seed": self.seed}
        rows = [json.dumps({"header": head}, sort_keys=True)]
        rows += [json.dumps(m.to_dict(), sort_keys=True) for m in self.messages]
        if reveal:
            rows.append(json.dumps({"hidden": self.hidden.to_dict()}, sort_keys=True))
        return rows

    def to_jsonl(self, reveal: bool = False) -> str:
        return "\n".join(self.lines(reveal)) + "\n"


@dataclass
class PauliFrame:
    """Per-qubit pad bits: the held state is X^x Z^z applied to the logical one."""

    x: list
    z: list

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "PauliFrame":
        return cls([int(b) for b in rng.integers(0, 2, n)], [int(b) for b in rng.integers(0, 2, n)])

    @classmethod
    def zero(cls, n: int) -> "PauliFrame":
        return cls([0] * n, [0] * n)

    def copy(self) -> "PauliFrame":
        return PauliFrame(list(self.x), list(self.z))

    def apply(self, gate: str, targets: Sequence[int]) -> None:
        """Conjugate the frame through a Clifford gate."""
        x, z = self.x, self.z
        if gate in ("I", "X", "Y", "Z"):
            return
        if gate == "H":
            (q,) = targets
            x[q], z[q] = z[q], x[q]
        elif gate in ("S", "SDG"):
            (q,) = targets
            z[q] ^= x[q]
        elif gate == "CNOT":
            c, t = targets
            x[t] ^= x[c]
            z[c] ^= z[t]
        elif gate == "CZ":
            a, b = targets
            z[a] ^= x[b]
            z[b] ^= x[a]
        elif gate == "SWAP":
            a, b = targets
            x[a], x[b] = x[b], x[a]
            z[a], z[b] = z[b], z[a]
        else:
            raise ValueError(f"{gate} is not a frame-tracked Clifford")

    def operator_gates(self) -> list[tuple[str, tuple]]:
        """Gates that apply the pad: Z^z first, then X^x."""
        gates = [("Z", (q,)) for q, b in enumerate(self.z) if b]
        return gates + [("X", (q,)) for q, b in enumerate(self.x) if b]

    def undo_gates(self) -> list[tuple[str, tuple]]:
        gates = [("X", (q,)) for q, b in enumerate(self.x) if b]
        return gates + [("Z", (q,)) for q, b in enumerate(self.z) if b]


class Prover:
    """Base prover: dispatches instructions to ``on_<kind>`` handlers.

    Subclasses expose ``local_unitary(qubit, matrix)`` so that generic attacks
    can act on whatever register the prover holds.
    """

    protocol = "generic"

    def __init__(self, attack=None, rng: np.random.Generator | None = None):
        from .adversary import AttackSpec

        self.attack = attack if attack is not None else AttackSpec.honest()
        self.rng = rng
        self._reported = 0
        self._fired = False

    def bind(self, rng: np.random.Generator) -> None:
        if self.rng is None:
            self.rng = rng

    def respond(self, msg: ProtocolMessage, qubits=None, final: bool = False):
        if msg.sender != VERIFIER:
            raise ValueError("provers only answer verifier messages")
        self._maybe_attack(msg, final)
        handler = getattr(self, "on_" + msg.kind.replace("-", "_"), None)
        if handler is None:
            raise ProtocolViolation(f"{type(self).__name__} cannot handle {msg.kind}")
        return handler(msg.payload, qubits)

    def _maybe_attack(self, msg: ProtocolMessage, final: bool = False) -> None:
        a = self.attack
        if self._fired or a.kind not in ("pauli", "unitary"):
            return
        if not self.attack_ready(msg):
            return
        if a.round == -1:
            due = final
        else:
            due = a.round is None or msg.round >= a.round
        if due:
            self._fired = True
            for q, mat in a.local_ops():
                self.local_unitary(q, mat)

    def attack_ready(self, msg: ProtocolMessage) -> bool:
        """Whether the target register is in the prover's hands for this message."""
        return True

    def local_unitary(self, qubit: int, matrix: np.ndarray) -> None:
        raise NotImplementedError

    def measurement_angle(self, angle: int) -> int:
        if self.attack.kind == "wrong_angle":
            return (angle + self.attack.offset) % 8
        return angle

    def report(self, bit: int) -> int:
        k = self._reported
        self._reported += 1
        if self.attack.kind == "flip_reports" and self.attack.flips(k):
            return bit ^ 1
        return bit


def trial_rng(seed: int, trial: int, stream: int = 0) -> np.random.Generator:
    """Independent generator for (seed, trial, stream)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(trial), int(stream)]))
