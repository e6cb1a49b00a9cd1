"""Prepare-and-send protocols: the verifier prepares qubits, the prover computes.

Covers Childs' one-time-pad delegation, UBQC, single-trap VUBQC on a ring,
Test-or-Compute, Clifford-QAS, a prover-view blindness check and a generic
accept-and-incorrect estimator.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from . import circuit as circ
from . import mbqc, qsim, stats
from .adversary import AttackSpec, make_prover
from .mbqc import Graph, LazyGraphRegister, MeasurementPattern
from .pauli import CliffordElement, PauliOperator, conjugate, enumerate_cliffords, random_clifford
from .protocol import (
    PauliFrame,
    ProtocolOutcome,
    ProtocolViolation,
    Prover,
    Transcript,
)
from .qsim import StateVector

_G = qsim.GATES
_PLUS = np.array([1, 1], dtype=complex) / np.sqrt(2)
POSSIBLE = 1e-9  # an output counts as correct when the honest run can produce it


def _bit(reply) -> int:
    if reply not in (0, 1):
        raise ProtocolViolation(f"expected a bit, got {reply!r}")
    return int(reply)


def _bits(reply, n: int) -> tuple:
    try:
        out = tuple(int(b) for b in reply)
    except TypeError:
        raise ProtocolViolation("expected a bit list") from None
    if len(out) != n or any(b not in (0, 1) for b in out):
        raise ProtocolViolation(f"expected {n} bits, got {reply!r}")
    return out


def _rejected(tr: Transcript, reason: str) -> ProtocolOutcome:
    tr.hidden.extra["abort"] = reason
    return tr.finish(ProtocolOutcome(False, (), None))


def _measure_all(vec: np.ndarray, n: int, rng: np.random.Generator) -> tuple:
    probs = np.abs(vec) ** 2
    k = int(rng.choice(probs.size, p=probs / probs.sum()))
    return tuple(int(c) for c in format(k, f"0{n}b")) if n else ()


def _possible(dist: Mapping[tuple, float] | np.ndarray, bits: tuple) -> bool:
    if isinstance(dist, np.ndarray):
        idx = int("".join(map(str, bits)), 2) if bits else 0
        return bool(dist[idx] > POSSIBLE)
    return dist.get(tuple(bits), 0.0) > POSSIBLE


# ---------------------------------------------------------------- Childs


class ChildsProver(Prover):
    """Holds the padded register whenever the verifier hands it over."""

    protocol = "childs"

    def __init__(self, attack=None, rng=None):
        super().__init__(attack, rng)
        self.state: StateVector | None = None

    def attack_ready(self, msg) -> bool:
        return self.state is not None

    def local_unitary(self, qubit, matrix):
        self.state = qsim.apply_unitary(self.state, matrix, [qubit])

    def on_qubit_batch(self, payload, qubits):
        self.state = qubits

    def on_gate_request(self, payload, _):
        self.state = qsim.apply_unitary(self.state, payload["gate"], payload["targets"])

    def on_state_request(self, payload, _):
        state, self.state = self.state, None
        return state

    def on_measure_request(self, payload, _):
        bits = _measure_all(self.state.amplitudes, self.state.num_qubits, self.rng)
        return [self.report(b) for b in bits]


CHILDS_GATES = {"I", "X", "Y", "Z", "H", "S", "SDG", "CNOT", "CZ", "SWAP", "T"}


def childs_run(
    gates: Sequence,
    input_state: StateVector,
    prover: Prover | None = None,
    rng: np.random.Generator | None = None,
    seed: int | None = None,
) -> ProtocolOutcome:
    """One-time-padded delegation with a dummy-swap S correction after each T."""
    rng = rng if rng is not None else np.random.default_rng(seed)
    gates = circ.normalize(gates)
    for name, _ in gates:
        if name not in CHILDS_GATES:
            raise ValueError(f"{name} is outside Clifford+T")
    n = input_state.num_qubits
    n_t = sum(1 for g, _ in gates if g == "T")
    total = n + n_t
    if total > qsim.MAX_STATE_QUBITS:
        raise ValueError("too many qubits")
    prover = prover or ChildsProver()
    prover.bind(np.random.default_rng(rng.integers(2**63)))
    tr = Transcript("childs", seed)
    frame = PauliFrame.random(total, rng)
    tr.hidden.pad_keys.append({"x": list(frame.x), "z": list(frame.z)})

    state = qsim.product_state([input_state] + [qsim.zero_state(1)] * n_t) if n_t else input_state
    state = qsim.apply_circuit(state, frame.operator_gates())

    def hand_over(st):
        msg = tr.send("qubit-batch", {"count": total})
        prover.respond(msg, st)

    def take_back() -> StateVector:
        msg = tr.send("state-request", {"count": total})
        st = prover.respond(msg)
        if not isinstance(st, StateVector) or st.num_qubits != total:
            raise ProtocolViolation("prover returned a malformed register")
        tr.reply(msg, "qubit-return", {"count": total})
        return st

    try:
        hand_over(state)
        dummy = n
        for name, ts in gates:
            msg = tr.send("gate-request", {"gate": name, "targets": list(ts)})
            prover.respond(msg)
            if name != "T":
                frame.apply(name, ts)
                continue
            (j,) = ts
            a = frame.x[j]
            # T X^a Z^b = S^a X^a Z^b T up to phase; with a = 1 the requested S
            # turns the stray S into a Z, which the frame update below absorbs
            st = take_back()
            fresh = PauliFrame.random(1, rng)
            st = qsim.apply_circuit(st, [(g, (j,)) for g, _ in fresh.operator_gates()])
            frame.x[j] ^= fresh.x[0]
            frame.z[j] ^= fresh.z[0]
            swapped = a == 0
            if swapped:
                st = qsim.apply_unitary(st, "SWAP", [j, dummy])
                frame.apply("SWAP", (j, dummy))
            tr.hidden.pad_keys.append({"qubit": j, "x": fresh.x[0], "z": fresh.z[0], "swap": int(swapped)})
            hand_over(st)
            prover.respond(tr.send("gate-request", {"gate": "S", "targets": [j]}))
            frame.apply("S", (j,))
            st = take_back()
            if swapped:
                st = qsim.apply_unitary(st, "SWAP", [j, dummy])
                frame.apply("SWAP", (j, dummy))
            hand_over(st)
            dummy += 1
        msg = tr.send("measure-request", {"count": total})
        raw = _bits(prover.respond(msg, final=True), total)
        tr.reply(msg, "outcome-bits", {"bits": list(raw)})
    except ProtocolViolation as exc:
        return _rejected(tr, str(exc))
    out = tuple(raw[k] ^ frame.x[k] for k in range(n))
    tr.hidden.extra["final_frame"] = {"x": list(frame.x), "z": list(frame.z)}
    ideal = circ.simulate(gates, n, input_state).probabilities()
    return tr.finish(ProtocolOutcome(True, out, _possible(ideal, out)))


# ---------------------------------------------------------------- MBQC provers


class MBQCProver(Prover):
    """Entangles the received qubits by the announced graph and measures on request."""

    protocol = "ubqc"

    def __init__(self, attack=None, rng=None):
        super().__init__(attack, rng)
        self.prepared: dict | None = None
        self.register: LazyGraphRegister | None = None

    def attack_ready(self, msg) -> bool:
        # a measured vertex has left the prover's hands for good
        if self.register is None:
            return False
        return not any(q in self.register.done for q, _ in self.attack.local_ops())

    def local_unitary(self, qubit, matrix):
        self.register.apply(qubit, matrix, entangled=True)

    def on_qubit_batch(self, payload, qubits):
        self.prepared = dict(qubits)

    def on_graph(self, payload, _):
        g = Graph(tuple(payload["vertices"]), frozenset(tuple(e) for e in payload["edges"]))
        if set(self.prepared) != set(g.vertices):
            raise ProtocolViolation("graph does not match the received qubits")
        self.register = LazyGraphRegister(g, self.prepared)

    def on_angle_request(self, payload, _):
        angle = self.measurement_angle(int(payload["angle"]))
        b, _ = self.register.measure(int(payload["vertex"]), angle, self.rng.random())
        return self.report(b)


def _open_graph(tr: Transcript, prover: Prover, graph: Graph, prepared: dict) -> None:
    prover.respond(tr.send("qubit-batch", {"count": graph.num_vertices}), prepared)
    prover.respond(tr.send("graph", graph.to_dict()))


def _ask_angle(tr: Transcript, prover: Prover, v: int, delta: int, final: bool = False) -> int:
    msg = tr.send("angle-request", {"vertex": v, "angle": int(delta) % 8})
    b = _bit(prover.respond(msg, final=final))
    tr.reply(msg, "outcome-bit", {"bit": b})
    return b


def ubqc_run(
    pattern: MeasurementPattern,
    prover: Prover | None = None,
    rng: np.random.Generator | None = None,
    seed: int | None = None,
    hide: bool = True,
    reference: Mapping[tuple, float] | None = None,
) -> ProtocolOutcome:
    """Blind execution of a fully measured pattern.

    Output bits are the unpadded readout outcomes, or every unpadded outcome
    in measurement order when the pattern has no readout list.
    """
    if pattern.inputs or pattern.outputs:
        raise ValueError("UBQC here takes patterns without quantum inputs or outputs")
    rng = rng if rng is not None else np.random.default_rng(seed)
    prover = prover or MBQCProver()
    prover.bind(np.random.default_rng(rng.integers(2**63)))
    tr = Transcript("ubqc", seed)
    verts = pattern.graph.vertices
    theta = {v: int(rng.integers(8)) if hide else 0 for v in verts}
    r = {v: int(rng.integers(2)) if hide else 0 for v in verts}
    tr.hidden.theta, tr.hidden.r = theta, r
    prepared = {v: qsim.plus_state(theta[v]).amplitudes for v in verts}
    s: dict[int, int] = {}
    try:
        _open_graph(tr, prover, pattern.graph, prepared)
        for k, v in enumerate(pattern.order):
            delta = pattern.corrected_angle(v, s) + theta[v] + 4 * r[v]
            b = _ask_angle(tr, prover, v, delta, final=k == len(pattern.order) - 1)
            s[v] = b ^ r[v]
    except ProtocolViolation as exc:
        return _rejected(tr, str(exc))
    out = tuple(s[v] for v in (pattern.readout or pattern.order))
    correct = None if reference is None else _possible(reference, out)
    return tr.finish(ProtocolOutcome(True, out, correct))


# ---------------------------------------------------------------- blindness


def _delta_table(pattern: MeasurementPattern, reported: Sequence[int], thetas: np.ndarray, rs: np.ndarray,
                 measured_index: Sequence[int]) -> np.ndarray:
    """Flattened delta string for each (theta, r) row, given fixed reported bits."""
    order = pattern.order
    deltas = np.zeros((thetas.shape[0], len(order)), dtype=np.int64)
    for row in range(thetas.shape[0]):
        s = {}
        for k, v in enumerate(order):
            i = measured_index[k]
            d = pattern.corrected_angle(v, s) + thetas[row, i] + 4 * rs[row, k]
            deltas[row, k] = d % 8
            s[v] = reported[k] ^ rs[row, k]
    return deltas @ (8 ** np.arange(len(order))[::-1])


def prover_view(pattern: MeasurementPattern, reported: Sequence[int], average_r: bool = True) -> np.ndarray:
    """Classical-quantum state of everything the prover sees for fixed replies.

    Index [delta_label] holds the (unnormalized) density matrix of the
    received qubits jointly with that delta string; the weights sum to one.
    """
    verts = pattern.graph.vertices
    n = len(verts)
    m = len(pattern.order)
    if n > 3:
        raise ValueError("exact views are limited to 3 qubits")
    idx = [verts.index(v) for v in pattern.order]
    thetas = np.array(list(itertools.product(range(8), repeat=n)), dtype=np.int64)
    rs_all = np.array(list(itertools.product(range(2), repeat=m)), dtype=np.int64) if average_r else np.zeros((1, m), dtype=np.int64)
    th = np.repeat(thetas, rs_all.shape[0], axis=0)
    rs = np.tile(rs_all, (thetas.shape[0], 1))
    labels = _delta_table(pattern, reported, th, rs, idx)
    # product |+theta> states over all qubits
    phases = np.exp(1j * np.pi * th / 4)
    vec = np.ones((th.shape[0], 1), dtype=complex)
    for q in range(n):
        single = np.stack([np.ones(th.shape[0]), phases[:, q]], axis=1) / np.sqrt(2)
        vec = np.einsum("ra,rb->rab", vec, single).reshape(th.shape[0], -1)
    rho = np.einsum("ra,rb->rab", vec, vec.conj()) / th.shape[0]
    view = np.zeros((8**m, 2**n, 2**n), dtype=complex)
    np.add.at(view, labels, rho)
    return view


def blindness_check(pattern_a: MeasurementPattern, pattern_b: MeasurementPattern, average_r: bool = True,
                    samples: int | None = None, rng: np.random.Generator | None = None) -> float:
    """Max over reported-bit strings of the trace distance between prover views.

    Exact for patterns of up to 3 qubits. Larger patterns fall back to a
    Monte Carlo estimate of the delta-distribution distance (``samples``).
    """
    if pattern_a.graph != pattern_b.graph or pattern_a.order != pattern_b.order:
        raise ValueError("patterns must share graph and measurement order")
    m = len(pattern_a.order)
    if pattern_a.num_qubits > 3:
        return _blindness_sampled(pattern_a, pattern_b, samples or 20000, rng or np.random.default_rng(0))
    worst = 0.0
    for reported in itertools.product((0, 1), repeat=m):
        va = prover_view(pattern_a, reported, average_r)
        vb = prover_view(pattern_b, reported, average_r)
        diff = va - vb
        td = 0.5 * sum(np.abs(np.linalg.eigvalsh(d)).sum() for d in diff if np.any(np.abs(d) > 1e-15))
        worst = max(worst, float(td))
    return worst


def _blindness_sampled(pa, pb, samples, rng) -> float:
    # delta strings only: with hidden theta they are uniform for any pattern
    worst = 0.0
    m = len(pa.order)
    verts = pa.graph.vertices
    idx = [verts.index(v) for v in pa.order]
    reported = rng.integers(0, 2, m)
    th = rng.integers(0, 8, (samples, len(verts)))
    rs = rng.integers(0, 2, (samples, m))
    for p in (pa, pb):
        labels = _delta_table(p, reported, th, rs, idx)
        counts = np.bincount(labels % 8, minlength=8) / samples
        worst = max(worst, float(0.5 * np.abs(counts - 1 / 8).sum()))
    return worst


# ---------------------------------------------------------------- VUBQC


@dataclass(frozen=True)
class RingLayout:
    """Placement of a chain computation on the ring C_N around one trap."""

    size: int
    trap: int
    dummies: tuple
    chain: tuple  # ring positions of the chain vertices, in chain order

    @classmethod
    def place(cls, chain_length: int, trap: int) -> "RingLayout":
        n = chain_length + 3
        dummies = ((trap - 1) % n, (trap + 1) % n)
        chain = tuple(sorted(p for p in range(n) if p != trap and p not in dummies))
        for a, b in zip(chain, chain[1:]):
            if (b - a) % n not in (1, n - 1):
                raise ValueError("chain does not fit the measurement order for this trap")
        return cls(n, trap, dummies, chain)


@functools.lru_cache(maxsize=64)
def _reference(pattern_json: str) -> dict:
    return mbqc.exact_readout_distribution(MeasurementPattern.from_json(pattern_json))


def vubqc_chain(pattern: MeasurementPattern) -> list[int]:
    """Validate a readout chain pattern and return its vertices in chain order."""
    g = pattern.graph
    if pattern.inputs or pattern.outputs or len(pattern.readout) != 1:
        raise ValueError("VUBQC takes a single-wire chain pattern with one readout vertex")
    order = list(pattern.order)
    if not 1 <= len(order) <= 2:
        raise ValueError("the ring instance supports chains of 1 or 2 vertices")
    expected = {(min(a, b), max(a, b)) for a, b in zip(order, order[1:])}
    if set(g.edges) != expected:
        raise ValueError("pattern graph must be the chain in measurement order")
    return order


def vubqc_run(
    pattern: MeasurementPattern,
    prover: Prover | None = None,
    rng: np.random.Generator | None = None,
    seed: int | None = None,
    trap: int | None = None,
) -> ProtocolOutcome:
    """Single-trap verification on the ring C_N, N = chain length + 3.

    The trap is a uniformly placed |+theta> whose two ring neighbours are
    dummies; the remaining vertices carry the chain. Vertices are measured in
    ring order, which does not depend on the trap position.
    """
    chain = vubqc_chain(pattern)
    rng = rng if rng is not None else np.random.default_rng(seed)
    prover = prover or MBQCProver()
    prover.bind(np.random.default_rng(rng.integers(2**63)))
    n = len(chain) + 3
    t = int(rng.integers(n)) if trap is None else int(trap) % n
    lay = RingLayout.place(len(chain), t)
    ring = Graph.cycle(n)
    tr = Transcript("vubqc", seed)
    dummy_bits = {p: int(rng.integers(2)) for p in lay.dummies}
    theta = {p: int(rng.integers(8)) for p in range(n) if p not in lay.dummies}
    r = {p: int(rng.integers(2)) for p in range(n) if p not in lay.dummies}
    tr.hidden.trap_position, tr.hidden.dummy_assignment = t, dummy_bits
    tr.hidden.theta, tr.hidden.r = theta, r
    prepared = {}
    for p in range(n):
        prepared[p] = qsim.basis_state([dummy_bits[p]]).amplitudes if p in dummy_bits else qsim.plus_state(theta[p]).amplitudes
    to_pattern = dict(zip(lay.chain, chain))

    def dummy_flip(p):
        return sum(dummy_bits.get(w, 0) for w in ring.neighbors(p)) & 1

    s: dict[int, int] = {}
    try:
        _open_graph(tr, prover, ring, prepared)
        for p in range(n):
            last = p == n - 1
            if p in dummy_bits:
                _ask_angle(tr, prover, p, int(rng.integers(8)), last)
                continue
            if p == t:
                delta = theta[p] + 4 * r[p] + 4 * dummy_flip(p)
                b = _ask_angle(tr, prover, p, delta, last)
                if b != r[p]:
                    return _rejected(tr, "trap")
                continue
            v = to_pattern[p]
            delta = pattern.corrected_angle(v, s) + theta[p] + 4 * r[p] + 4 * dummy_flip(p)
            b = _ask_angle(tr, prover, p, delta, last)
            s[v] = b ^ r[p]
    except ProtocolViolation as exc:
        return _rejected(tr, str(exc))
    out = tuple(s[v] for v in pattern.readout)
    return tr.finish(ProtocolOutcome(True, out, _possible(_reference(pattern.to_json()), out)))


def vubqc_detection_oracle(pattern: MeasurementPattern, attack: AttackSpec) -> float:
    """Exact reject probability of a fixed single-qubit deviation, by density matrices.

    Averages over trap position, dummy bits and the trap's theta and r. The
    other |+theta> qubits enter through their theta-average, which is I/2.
    """
    chain = vubqc_chain(pattern)
    n = len(chain) + 3
    ring = Graph.cycle(n)
    total = 0.0
    count = 0
    if attack.kind not in ("honest", "pauli", "unitary", "wrong_angle"):
        raise ValueError(f"the oracle does not model {attack.kind} attacks")
    ops = attack.local_ops() if attack.kind in ("pauli", "unitary") else []
    offset = attack.offset if attack.kind == "wrong_angle" else 0
    for t in range(n):
        lay = RingLayout.place(len(chain), t)
        for d in itertools.product((0, 1), repeat=2):
            dummy_bits = dict(zip(lay.dummies, d))
            for th, rt in itertools.product(range(8), (0, 1)):
                singles = []
                for p in range(n):
                    if p in dummy_bits:
                        v = qsim.basis_state([dummy_bits[p]]).amplitudes
                        singles.append(np.outer(v, v.conj()))
                    elif p == t:
                        v = qsim.plus_state(th).amplitudes
                        singles.append(np.outer(v, v.conj()))
                    else:
                        avg = sum(np.outer(w, w.conj()) for w in (qsim.plus_state(a).amplitudes for a in range(8))) / 8
                        singles.append(avg)
                rho = singles[0]
                for sgl in singles[1:]:
                    rho = np.kron(rho, sgl)
                dm = qsim.DensityMatrix(n, rho)
                for a, b in ring.edges:
                    dm = qsim.apply_unitary(dm, "CZ", [a, b])
                for q, mat in ops:
                    dm = qsim.apply_unitary(dm, mat, [q])
                red = qsim.partial_trace(dm, [t]).matrix
                flip = sum(dummy_bits[w] for w in ring.neighbors(t)) & 1
                delta = (th + 4 * rt + 4 * flip + offset) % 8
                basis = qsim.xy_basis(delta)
                wrong = basis[1 - rt]
                total += float(np.real(wrong @ red @ wrong.conj()))
                count += 1
    return total / count


# ---------------------------------------------------------------- Test-or-Compute


class ToCProver(Prover):
    """Applies the requested Cliffords and runs T gadgets with received auxiliaries."""

    protocol = "toc"

    def __init__(self, attack=None, rng=None):
        super().__init__(attack, rng)
        self.state: StateVector | None = None
        self.aux: StateVector | None = None

    def attack_ready(self, msg) -> bool:
        return self.state is not None

    def local_unitary(self, qubit, matrix):
        self.state = qsim.apply_unitary(self.state, matrix, [qubit])

    def on_qubit_batch(self, payload, qubits):
        if self.state is None:
            self.state = qubits
        else:
            self.aux = qubits

    def on_gate_request(self, payload, _):
        gate, ts = payload["gate"], payload["targets"]
        if gate != "T-gadget":
            self.state = qsim.apply_unitary(self.state, gate, ts)
            return None
        (j,) = ts
        n = self.state.num_qubits
        joint = np.kron(self.state.amplitudes, self.aux.amplitudes)
        joint = qsim.apply_matrix(joint, n + 1, _G["CNOT"], [n, j])
        psi = np.moveaxis(joint.reshape((2,) * (n + 1)), j, 0).reshape(2, -1)
        p0 = float(np.vdot(psi[0], psi[0]).real)
        c = int(self.rng.random() >= p0)
        rest = psi[c] / np.linalg.norm(psi[c])
        # the auxiliary (now last) takes the measured qubit's slot
        rest = np.moveaxis(rest.reshape((2,) * n), n - 1, j).reshape(-1)
        self.state = StateVector(n, rest)
        self.aux = None
        return self.report(c)

    def on_gadget_bit(self, payload, _):
        if payload["bit"]:
            self.state = qsim.apply_unitary(self.state, "S", [payload["target"]])

    def on_measure_request(self, payload, _):
        bits = _measure_all(self.state.amplitudes, self.state.num_qubits, self.rng)
        return [self.report(b) for b in bits]


TOC_GATES = {"X", "Z", "H", "T", "CNOT"}
RUN_TYPES = ("computation", "x-test", "z-test")


def toc_expand(gates: Sequence) -> list:
    """Prover-level operations: each H becomes H (TT) H (TT) H (TT) H, T a gadget."""
    out = []
    for name, ts in circ.normalize(gates):
        if name not in TOC_GATES:
            raise ValueError(f"{name} is outside {{X, Z, H, T, CNOT}}")
        if name == "H":
            g = ("gadget", ts)
            out += [("H", ts), g, g, ("H", ts), g, g, ("H", ts), g, g, ("H", ts)]
        elif name == "T":
            out.append(("gadget", ts))
        else:
            out.append((name, ts))
    return out


def toc_run(
    gates: Sequence,
    run_type: str = "random",
    prover: Prover | None = None,
    rng: np.random.Generator | None = None,
    seed: int | None = None,
    num_qubits: int | None = None,
) -> ProtocolOutcome:
    """One Test-or-Compute run on |0...0>.

    Computation runs are always accepted and carry ``correct``; test runs
    report ``correct = None`` since they compute nothing.
    """
    rng = rng if rng is not None else np.random.default_rng(seed)
    gates = circ.normalize(gates)
    ops = toc_expand(gates)
    n = num_qubits or circ.width(gates)
    if run_type == "random":
        run_type = RUN_TYPES[int(rng.integers(3))]
    if run_type not in RUN_TYPES:
        raise ValueError(f"unknown run type {run_type!r}")
    prover = prover or ToCProver()
    prover.bind(np.random.default_rng(rng.integers(2**63)))
    tr = Transcript("toc", seed)
    tr.hidden.extra["run_type"] = run_type
    frame = PauliFrame.random(n, rng)
    tr.hidden.pad_keys.append({"x": list(frame.x), "z": list(frame.z)})
    compute = run_type == "computation"
    mode = ["Z" if run_type == "z-test" else "X"] * n  # X: logical |0>, Z: logical |+>
    start = qsim.zero_state(n)
    if run_type == "z-test":
        start = qsim.apply_circuit(start, [("H", (q,)) for q in range(n)])
    state = qsim.apply_circuit(start, frame.operator_gates())
    try:
        prover.respond(tr.send("qubit-batch", {"count": n}), state)
        for name, ts in ops:
            if name != "gadget":
                prover.respond(tr.send("gate-request", {"gate": name, "targets": list(ts)}))
                if name in ("X", "Z"):
                    if not compute:
                        # absorb the physical Pauli into the pad: the test state stays put
                        (q,) = ts
                        if name == "X":
                            frame.x[q] ^= 1
                        else:
                            frame.z[q] ^= 1
                    continue
                frame.apply(name, ts)
                if name == "H" and not compute:
                    mode[ts[0]] = "Z" if mode[ts[0]] == "X" else "X"
                continue
            (j,) = ts
            a, b = frame.x[j], frame.z[j]
            d, e, y = (int(v) for v in rng.integers(0, 2, 3))
            if compute:
                aux = qsim.apply_circuit(qsim.plus_state(), [("T", (0,)), *(("S", (0,)),) * y,
                                                             *(("Z", (0,)),) * e, *(("X", (0,)),) * d])
            elif mode[j] == "X":
                aux = qsim.basis_state([d])
            else:
                aux = qsim.apply_circuit(qsim.plus_state(), [*(("S", (0,)),) * y, *(("Z", (0,)),) * e,
                                                             *(("X", (0,)),) * d])
            prover.respond(tr.send("qubit-batch", {"count": 1}), aux)
            msg = tr.send("gate-request", {"gate": "T-gadget", "targets": [j]})
            c = _bit(prover.respond(msg))
            tr.reply(msg, "gadget-bit", {"bit": c})
            m = a ^ c
            if compute:
                x = a ^ c ^ d ^ y
                frame.x[j], frame.z[j] = m, (m & (d ^ y)) ^ a ^ b ^ c ^ e ^ y
            elif mode[j] == "X":
                if c != a ^ d:
                    return _rejected(tr, "gadget check")
                x = int(rng.integers(2))
                frame.x[j], frame.z[j] = d, 0
            else:
                x = y
                frame.x[j], frame.z[j] = m, b ^ e ^ y ^ (d & y)
            tr.hidden.gadget_bits.append({"qubit": j, "d": d, "e": e, "y": y, "x": x, "c": c})
            prover.respond(tr.send("gadget-bit", {"bit": x, "target": j}))
        msg = tr.send("measure-request", {"count": n})
        raw = _bits(prover.respond(msg, final=True), n)
        tr.reply(msg, "outcome-bits", {"bits": list(raw)})
    except ProtocolViolation as exc:
        return _rejected(tr, str(exc))
    out = tuple(raw[k] ^ frame.x[k] for k in range(n))
    tr.hidden.extra["final_frame"] = {"x": list(frame.x), "z": list(frame.z)}
    if compute:
        ideal = circ.simulate(gates, n).probabilities()
        return tr.finish(ProtocolOutcome(True, out, _possible(ideal, out)))
    if run_type == "x-test":
        return tr.finish(ProtocolOutcome(not any(out), out, None))
    tr.hidden.extra["discarded_output"] = list(out)
    return tr.finish(ProtocolOutcome(True, (), None))


# ---------------------------------------------------------------- Clifford-QAS


class SharedRegister:
    """Joint state of every block; possession is tracked by the holders."""

    def __init__(self, state: StateVector):
        self.vec = state.amplitudes.copy()
        self.n = state.num_qubits

    def apply(self, matrix: np.ndarray, targets: Sequence[int]) -> None:
        self.vec = qsim.apply_matrix(self.vec, self.n, np.asarray(matrix, dtype=complex), list(targets))

    def measure_zero(self, targets: Sequence[int], u: float) -> bool:
        """Measure ``targets`` in the computational basis; True iff all read 0."""
        psi = np.moveaxis(self.vec.reshape((2,) * self.n), list(targets), list(range(len(targets))))
        psi = psi.reshape(2 ** len(targets), -1)
        p0 = float(np.vdot(psi[0], psi[0]).real)
        ok = u < p0
        keep = np.zeros_like(psi)
        if ok:
            keep[0] = psi[0]
        else:
            keep[1:] = psi[1:]
        vec = np.moveaxis(keep.reshape((2,) * self.n), list(range(len(targets))), list(targets)).reshape(-1)
        self.vec = vec / np.linalg.norm(vec)
        return ok

    def measure_bit(self, q: int, u: float) -> int:
        psi = np.moveaxis(self.vec.reshape((2,) * self.n), q, 0).reshape(2, -1)
        p0 = float(np.vdot(psi[0], psi[0]).real)
        b = int(u >= p0)
        keep = np.zeros_like(psi)
        keep[b] = psi[b]
        vec = np.moveaxis(keep.reshape((2,) * self.n), 0, q).reshape(-1)
        self.vec = vec / np.linalg.norm(vec)
        return b


class CQASProver(Prover):
    """Untrusted storage: keeps blocks and returns them on request."""

    protocol = "cqas"

    def __init__(self, attack=None, rng=None):
        super().__init__(attack, rng)
        self.held: set[int] = set()
        self.register: SharedRegister | None = None
        self.block_size = 0

    def attack_ready(self, msg) -> bool:
        if self.register is None:
            return False
        return all(q // self.block_size in self.held for q, _ in self.attack.local_ops())

    def local_unitary(self, qubit, matrix):
        if qubit // self.block_size not in self.held:
            raise ProtocolViolation("prover does not hold that block")
        self.register.apply(matrix, [qubit])

    def on_qubit_batch(self, payload, qubits):
        self.register = qubits
        self.block_size = int(payload["size"])
        self.held.add(int(payload["block"]))

    def on_state_request(self, payload, _):
        self.held.discard(int(payload["block"]))
        return self.register


def cqas_run(
    gates: Sequence,
    m: int,
    prover: Prover | None = None,
    rng: np.random.Generator | None = None,
    seed: int | None = None,
    input_bits: Sequence[int] | None = None,
) -> ProtocolOutcome:
    """Clifford-authenticated storage at the prover with verifier-side gates."""
    if not 1 <= m <= 2:
        raise ValueError("block size t = m + 1 must be at most 3")
    rng = rng if rng is not None else np.random.default_rng(seed)
    gates = circ.normalize(gates)
    n = len(input_bits) if input_bits is not None else circ.width(gates)
    bits = list(input_bits) if input_bits is not None else [0] * n
    t = m + 1
    prover = prover or CQASProver()
    prover.bind(np.random.default_rng(rng.integers(2**63)))
    tr = Transcript("cqas", seed)
    reg = SharedRegister(qsim.basis_state(sum(([b] + [0] * m for b in bits), [])))
    keys: list[CliffordElement | None] = [None] * n

    def block(i):
        return list(range(i * t, (i + 1) * t))

    def send(i):
        c = random_clifford(t, rng)
        keys[i] = c
        tr.hidden.clifford_keys.append(c)
        reg.apply(c.to_matrix(), block(i))
        prover.respond(tr.send("qubit-batch", {"block": i, "size": t}), reg)

    def fetch(i, final=False) -> bool:
        msg = tr.send("state-request", {"block": i})
        got = prover.respond(msg, final=final)
        if got is not reg:
            raise ProtocolViolation("prover returned a different register")
        tr.reply(msg, "qubit-return", {"block": i})
        reg.apply(keys[i].to_matrix().conj().T, block(i))
        return reg.measure_zero(block(i)[1:], rng.random())

    try:
        for i in range(n):
            send(i)
        for name, ts in gates:
            for i in ts:
                if not fetch(i):
                    return _rejected(tr, f"flag of block {i}")
            reg.apply(_G[name], [i * t for i in ts])
            for i in ts:
                send(i)
        out = []
        for i in range(n):
            if not fetch(i, final=True):
                return _rejected(tr, f"flag of block {i}")
            out.append(reg.measure_bit(i * t, rng.random()))
    except ProtocolViolation as exc:
        return _rejected(tr, str(exc))
    out = tuple(out)
    ideal = circ.simulate(gates, n, bits).probabilities()
    return tr.finish(ProtocolOutcome(True, out, _possible(ideal, out)))


def _flips_data_only(clifford_matrix: np.ndarray, attack_matrix: np.ndarray) -> bool:
    # Q = C^dag P C maps |0...0> to the basis state of its X part; the data
    # qubit is the most significant one
    q = clifford_matrix.conj().T @ attack_matrix @ clifford_matrix
    return int(np.argmax(np.abs(q[:, 0]))) == q.shape[0] // 2


def cqas_exact(attack: PauliOperator) -> float:
    """Exact accept-and-incorrect probability of a Pauli attack on one block.

    The block holds a basis data bit followed by |0...0> flags, so a Pauli
    Q = C^dag P C corrupts undetected iff its X part touches the data qubit only.
    Averages over the whole Clifford group on the block (t <= 2).
    """
    group = enumerate_cliffords(attack.num_qubits)
    p = attack.to_matrix()
    return sum(_flips_data_only(c.to_matrix(), p) for c in group) / len(group)


def cqas_mixing_value(t: int) -> float:
    """Closed form of ``cqas_exact`` for any non-identity Pauli: 2^t / (4^t - 1).

    Clifford conjugation maps a fixed non-identity Pauli to a uniform one, and
    2^t of the 4^t - 1 candidates flip the data bit alone.
    """
    return 2**t / (4**t - 1)


def cqas_sampled(attack: PauliOperator, trials: int, rng: np.random.Generator) -> stats.Estimate:
    """Monte Carlo version of ``cqas_exact`` with uniformly sampled Cliffords."""
    p = attack.to_matrix()
    bad = sum(_flips_data_only(random_clifford(attack.num_qubits, rng).to_matrix(), p) for _ in range(trials))
    return stats.wilson(bad, trials)


# ---------------------------------------------------------------- security experiment


@dataclass(frozen=True)
class SecurityEstimate:
    protocol: str
    attack: AttackSpec
    accept: stats.Estimate
    incorrect_accept: stats.Estimate

    def to_dict(self) -> dict:
        return {"protocol": self.protocol, "attack": self.attack.to_dict(),
                "accept": self.accept.to_dict(), "incorrect_accept": self.incorrect_accept.to_dict()}


def default_instance(protocol: str) -> dict:
    """Small deterministic instances used when a config names none."""
    if protocol == "vubqc":
        # a lone |+> read out at angle 0: the honest output is always 0
        return {"pattern": mbqc.chain_pattern([], is_input=False, readout=True)}
    if protocol == "ubqc":
        pattern = mbqc.chain_pattern([4, 0], is_input=False, readout=True)
        return {"pattern": pattern, "reference": mbqc.exact_readout_distribution(pattern)}
    if protocol == "toc":
        return {"gates": circ.parse_circuit("X 0; H 1; CNOT 0 1; H 1")}
    if protocol == "cqas":
        return {"gates": circ.parse_circuit("X 0; CNOT 0 1"), "m": 1}
    if protocol == "childs":
        return {"gates": circ.parse_circuit("H 0; T 0; H 0; CNOT 0 1"), "input": qsim.zero_state(2)}
    raise ValueError(f"no default instance for {protocol!r}")


def run_protocol(protocol: str, instance: Mapping, prover: Prover, rng: np.random.Generator,
                 seed: int | None = None) -> ProtocolOutcome:
    if protocol == "vubqc":
        return vubqc_run(instance["pattern"], prover, rng, seed)
    if protocol == "ubqc":
        pattern = instance["pattern"]
        ref = instance.get("reference")
        return ubqc_run(pattern, prover, rng, seed, reference=ref)
    if protocol == "toc":
        return toc_run(instance["gates"], instance.get("run_type", "random"), prover, rng, seed)
    if protocol == "cqas":
        return cqas_run(instance["gates"], instance.get("m", 1), prover, rng, seed, instance.get("input_bits"))
    if protocol == "childs":
        return childs_run(instance["gates"], instance["input"], prover, rng, seed)
    raise ValueError(f"unknown prepare-and-send protocol {protocol!r}")


def security_experiment(protocol: str, adversary: AttackSpec, trials: int, rng: np.random.Generator,
                        instance: Mapping | None = None,
                        on_outcome: Callable[[int, ProtocolOutcome], None] | None = None) -> SecurityEstimate:
    """Estimate Pr(accept) and Pr(incorrect, accept) under a fixed deviation."""
    if trials < 1:
        raise ValueError("trials must be positive")
    instance = instance if instance is not None else default_instance(protocol)
    acc = bad = 0
    for k in range(trials):
        prover = make_prover(protocol, adversary)
        out = run_protocol(protocol, instance, prover, rng)
        acc += out.accepted
        bad += out.incorrect_and_accepted
        if on_outcome is not None:
            on_outcome(k, out)
    return SecurityEstimate(protocol, adversary, stats.wilson(acc, trials), stats.wilson(bad, trials))
