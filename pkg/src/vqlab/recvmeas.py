"""Receive-and-measure protocols: the prover prepares states, the verifier only measures.

Measurement-only verification tests 2k+1 claimed graph-state copies with
checkerboard X/Z stabilizer measurements and computes on one untested copy.
The post hoc protocol samples Pauli terms of a unary-clock Hamiltonian and
accepts when the estimated energy of the prover's states is low.
"""

from __future__ import annotations

import functools
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import norm

from . import circuit as circ
from . import mbqc, qsim
from .mbqc import Graph, MeasurementPattern
from .pauli import PauliOperator, pauli_decompose
from .protocol import ProtocolOutcome, ProtocolViolation, Prover, Transcript
from .qsim import StateVector

MAX_MO_VERTICES = 12
MAX_MO_K = 10
MAX_FK_GATES = 5
MAX_FK_WIDTH = 3
POSTHOC_GATES = ("I", "X", "Z", "H", "CNOT", "CZ")  # real symmetric: I/X/Z strings suffice
Z95 = 1.6448536269514722  # one-sided 95% normal quantile


# ---------------------------------------------------------------- measurement-only


def two_coloring(graph: Graph) -> dict[int, int]:
    """Proper 2-coloring by BFS; raises if the graph has an odd cycle."""
    color: dict[int, int] = {}
    for root in graph.vertices:
        if root in color:
            continue
        color[root] = 0
        queue = [root]
        while queue:
            v = queue.pop()
            for w in graph.neighbors(v):
                if w not in color:
                    color[w] = 1 - color[v]
                    queue.append(w)
                elif color[w] == color[v]:
                    raise ValueError("graph is not bipartite; no X/Z checkerboard exists")
    return color


def checkerboard(graph: Graph, group: str) -> dict[int, str]:
    """Basis per vertex for the XZ group (color 0 measured in X) or the ZX group."""
    if group not in ("XZ", "ZX"):
        raise ValueError(f"unknown test group {group!r}")
    first = group[0]
    other = "Z" if first == "X" else "X"
    return {v: first if c == 0 else other for v, c in two_coloring(graph).items()}


def infer_kv_outcomes(graph: Graph, bits: Mapping[int, int], bases: Mapping[int, str]) -> dict[int, int]:
    """±1 value of K_v = X_v prod Z_w for every vertex measured in X.

    Outcome bit b stands for eigenvalue (-1)^b.
    """
    if set(bits) != set(graph.vertices) or set(bases) != set(graph.vertices):
        raise ValueError("bits and bases must cover every vertex")
    for a, b in graph.edges:
        if bases[a] == bases[b] or {bases[a], bases[b]} != {"X", "Z"}:
            raise ValueError(f"edge {(a, b)} is not an X/Z checkerboard pair")
    out = {}
    for v in graph.vertices:
        if bases[v] == "X":
            parity = bits[v] + sum(bits[w] for w in graph.neighbors(v))
            out[v] = -1 if parity & 1 else 1
    return out


@dataclass
class CopySet:
    """2k+1 claimed copies of the graph state."""

    copies: list
    graph: Graph
    k: int

    def __post_init__(self):
        if len(self.copies) != 2 * self.k + 1:
            raise ValueError(f"expected {2 * self.k + 1} copies, got {len(self.copies)}")
        for c in self.copies:
            if not isinstance(c, StateVector) or c.num_qubits != self.graph.num_vertices:
                raise ValueError("every copy must be a state on the graph's vertices")


@dataclass
class StabilizerTestPlan:
    """Which copy computes and which checkerboard each tested copy gets."""

    groups: list  # "XZ", "ZX" or "compute" per copy
    bases: dict = field(default_factory=dict)  # group -> vertex -> basis

    @classmethod
    def draw(cls, graph: Graph, k: int, rng: np.random.Generator) -> "StabilizerTestPlan":
        labels = ["compute"] + ["XZ"] * k + ["ZX"] * k
        order = rng.permutation(2 * k + 1)
        groups = [labels[i] for i in order]
        return cls(groups, {g: checkerboard(graph, g) for g in ("XZ", "ZX")})

    @property
    def compute_index(self) -> int:
        return self.groups.index("compute")


def measure_in_bases(state: StateVector, graph: Graph, bases: Mapping[int, str], rng: np.random.Generator) -> dict:
    """Single-qubit X/Z measurement of every vertex; returns vertex -> bit."""
    rotate = [("H", (k,)) for k, v in enumerate(graph.vertices) if bases[v] == "X"]
    rotated = qsim.apply_circuit(state, rotate)
    probs = rotated.probabilities()
    idx = int(rng.choice(probs.size, p=probs / probs.sum()))
    n = graph.num_vertices
    return {v: (idx >> (n - 1 - k)) & 1 for k, v in enumerate(graph.vertices)}


def measure_pattern(pattern: MeasurementPattern, state: StateVector, rng: np.random.Generator) -> dict[int, int]:
    """Run the pattern's adaptive measurements directly on a supplied graph-state vector."""
    live = list(pattern.graph.vertices)
    vec = state.amplitudes.copy()
    seen: dict[int, int] = {}
    for v in pattern.order:
        k = live.index(v)
        b, _, vec = qsim.measure_xy_discard(vec, len(live), k, pattern.corrected_angle(v, seen), rng.random())
        live.pop(k)
        seen[v] = b
    return seen


class MOProver(Prover):
    """Sends 2k+1 graph-state copies. ``mode="product"`` sends |+>^n instead."""

    protocol = "mo"

    def __init__(self, attack=None, rng=None, mode: str = "graph"):
        super().__init__(attack, rng)
        if mode not in ("graph", "product"):
            raise ValueError(f"unknown mode {mode!r}")
        self.mode = mode

    def on_state_request(self, payload, _):
        g = Graph(tuple(payload["vertices"]), frozenset(tuple(e) for e in payload["edges"]))
        n = g.num_vertices
        base = mbqc.build_graph_state(g).state if self.mode == "graph" else qsim.product_state([qsim.plus_state()] * n)
        copies = [base] * int(payload["copies"])
        a = self.attack
        if a.kind == "corrupt_copy":
            if not 0 <= a.index < len(copies):
                raise ProtocolViolation("corrupted copy index out of range")
            k = g.index(a.vertex)
            copies[a.index] = qsim.apply_unitary(copies[a.index], qsim.GATES[a.pauli], [k])
        elif a.kind == "flip_reports":
            flips = [("X", (k,)) for k in range(n) if a.flips(k)]
            copies = [qsim.apply_circuit(c, flips) for c in copies]
        return copies


@functools.lru_cache(maxsize=64)
def _pattern_reference(pattern_json: str) -> dict:
    return mbqc.exact_readout_distribution(MeasurementPattern.from_json(pattern_json))


def mo_run(
    graph: Graph,
    pattern: MeasurementPattern,
    k: int,
    prover: Prover | None = None,
    rng: np.random.Generator | None = None,
    seed: int | None = None,
) -> ProtocolOutcome:
    """Test k XZ and k ZX copies; compute on the one left over."""
    if graph.num_vertices > MAX_MO_VERTICES or not 1 <= k <= MAX_MO_K:
        raise ValueError("instance exceeds the measurement-only caps")
    if pattern.graph != graph or pattern.inputs or pattern.outputs:
        raise ValueError("pattern must be a closed pattern on the tested graph")
    two_coloring(graph)
    rng = rng if rng is not None else np.random.default_rng(seed)
    prover = prover or MOProver()
    prover.bind(np.random.default_rng(rng.integers(2**63)))
    tr = Transcript("mo", seed)
    plan = StabilizerTestPlan.draw(graph, k, rng)
    tr.hidden.extra["groups"] = plan.groups
    try:
        msg = tr.send("state-request", {"copies": 2 * k + 1, **graph.to_dict()})
        copies = prover.respond(msg)
        try:
            cs = CopySet(list(copies), graph, k)
        except (TypeError, ValueError) as exc:
            raise ProtocolViolation(str(exc)) from None
        tr.reply(msg, "qubit-return", {"count": len(cs.copies)})
    except ProtocolViolation as exc:
        tr.hidden.extra["abort"] = str(exc)
        return tr.finish(ProtocolOutcome(False, (), None))
    failed = []
    for i, group in enumerate(plan.groups):
        if group == "compute":
            continue
        bits = measure_in_bases(cs.copies[i], graph, plan.bases[group], rng)
        if any(val != 1 for val in infer_kv_outcomes(graph, bits, plan.bases[group]).values()):
            failed.append(i)
    tr.hidden.extra["failed_copies"] = failed
    if failed:
        return tr.finish(ProtocolOutcome(False, (), None))
    seen = measure_pattern(pattern, cs.copies[plan.compute_index], rng)
    out = tuple(seen[v] for v in (pattern.readout or pattern.order))
    ref = _pattern_reference(pattern.to_json())
    correct = ref.get(out, 0.0) > 1e-9 if pattern.readout else None
    return tr.finish(ProtocolOutcome(True, out, correct))


# ---------------------------------------------------------------- Feynman-Kitaev


def _check_fk(gates: Sequence, x: Sequence[int]) -> tuple:
    gates = circ.normalize(gates)
    if len(gates) > MAX_FK_GATES:
        raise ValueError(f"at most {MAX_FK_GATES} gates")
    if len(x) > MAX_FK_WIDTH or (gates and circ.width(gates) > len(x)):
        raise ValueError(f"width must be at most {MAX_FK_WIDTH} and match the input")
    return gates


def clock_string(t: int, steps: int) -> list[int]:
    """Unary clock |1^t 0^(T-t)>."""
    return [1] * t + [0] * (steps - t)


def fk_state(gates: Sequence, x: Sequence[int]) -> StateVector:
    """History state (T+1)^(-1/2) sum_t U_t...U_1|x> (x) |1^t 0^(T-t)>, data qubits first."""
    gates = _check_fk(gates, x)
    steps = len(gates)
    data = qsim.basis_state(list(x))
    total = np.zeros(2 ** (len(x) + steps), dtype=complex)
    for t in range(steps + 1):
        clock = qsim.basis_state(clock_string(t, steps)) if steps else qsim.zero_state(0)
        total += np.kron(data.amplitudes, clock.amplitudes)
        if t < steps:
            name, ts = gates[t]
            data = qsim.apply_unitary(data, name, ts)
    return StateVector(len(x) + steps, total / np.sqrt(steps + 1))


_P0 = np.diag([1, 0]).astype(complex)
_P1 = np.diag([0, 1]).astype(complex)
_RAISE = np.array([[0, 0], [1, 0]], dtype=complex)  # |1><0|
_I2 = np.eye(2, dtype=complex)


def _kron(*ms) -> np.ndarray:
    return functools.reduce(np.kron, ms, np.ones((1, 1), dtype=complex))


@dataclass
class ClockHamiltonian:
    """H = sum_i a_i S_i over hermitian Pauli strings (data qubits, then clock)."""

    terms: list  # (coefficient, PauliOperator)
    num_qubits: int
    a: float = 0.0
    b: float = 0.0
    parts: dict = field(default_factory=dict)  # part name -> term list, for diagnostics

    def __post_init__(self):
        for c, p in self.terms:
            if abs(np.imag(c)) > 1e-12 or p.num_qubits != self.num_qubits:
                raise ValueError("terms must be real multiples of n-qubit Pauli strings")
        if self.b - self.a <= 0 and (self.a or self.b):
            raise ValueError("thresholds need b > a")

    @property
    def identity_offset(self) -> float:
        return float(sum(c for c, p in self.terms if p.is_identity()))

    @property
    def weight(self) -> float:
        """sum |a_i| over non-identity terms."""
        return float(sum(abs(c) for c, p in self.terms if not p.is_identity()))

    def matrix(self, part: str | None = None) -> np.ndarray:
        terms = self.terms if part is None else self.parts[part]
        dim = 2**self.num_qubits
        out = np.zeros((dim, dim), dtype=complex)
        for c, p in terms:
            out += c * p.to_matrix()
        return out

    def energy(self, state: StateVector, part: str | None = None) -> float:
        v = state.amplitudes
        return float(np.vdot(v, self.matrix(part) @ v).real)

    def ground_energy(self) -> float:
        return float(np.linalg.eigvalsh(self.matrix())[0])

    def to_dict(self) -> dict:
        return {
            "num_qubits": self.num_qubits,
            "a": self.a,
            "b": self.b,
            "terms": [[float(c), p.letters()] for c, p in self.terms],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ClockHamiltonian":
        terms = [(float(c), PauliOperator.from_label(s).unsigned()) for c, s in d["terms"]]
        return cls(terms, int(d["num_qubits"]), float(d.get("a", 0.0)), float(d.get("b", 0.0)))


def _local_terms(acc: dict, matrix: np.ndarray, qubits: Sequence[int], n: int) -> None:
    for letters, c in pauli_decompose(matrix).items():
        full = ["I"] * n
        for q, ch in zip(qubits, letters):
            full[q] = ch
        key = "".join(full)
        acc[key] = acc.get(key, 0.0) + c


def _finish(acc: dict, n: int) -> list:
    out = []
    for key, c in sorted(acc.items()):
        if abs(c) > 1e-12:
            if abs(c.imag) > 1e-12:
                raise ValueError("non-hermitian term")
            if "Y" in key:
                raise ValueError("term needs a Y factor; use gates from " + ", ".join(POSTHOC_GATES))
            out.append((float(c.real), PauliOperator.from_label(key)))
    return out


def _clock_parts(gates: tuple, x: Sequence[int], accept_bit: int = 1) -> tuple[dict, int]:
    w = len(x)
    steps = len(gates)
    n = w + steps
    cq = [None] + [w + k for k in range(steps)]  # cq[k] = clock qubit k, 1-based
    parts: dict[str, dict] = {"in": {}, "clock": {}, "prop": {}, "out": {}}
    for j, bit in enumerate(x):
        wrong = _P1 if bit == 0 else _P0
        if steps:
            _local_terms(parts["in"], _kron(wrong, _P0), [j, cq[1]], n)
        else:
            _local_terms(parts["in"], wrong, [j], n)
    for k in range(1, steps):
        _local_terms(parts["clock"], _kron(_P0, _P1), [cq[k], cq[k + 1]], n)
    for t in range(1, steps + 1):
        name, ts = gates[t - 1]
        if name not in POSTHOC_GATES:
            raise ValueError(f"{name} is outside the real symmetric gate set {POSTHOC_GATES}")
        u = qsim.GATES[name]
        left = [cq[t - 1]] if t >= 2 else []
        right = [cq[t + 1]] if t < steps else []
        lp = [_P1] if left else []
        rp = [_P0] if right else []
        clock_q = left + [cq[t]] + right
        before = _kron(*lp, _P0, *rp)
        after = _kron(*lp, _P1, *rp)
        hop = _kron(*lp, _RAISE, *rp)
        dim_u = u.shape[0]
        local = 0.5 * (np.kron(np.eye(dim_u), before + after) - np.kron(u, hop) - np.kron(u.conj().T, hop.conj().T))
        _local_terms(parts["prop"], local, list(ts) + clock_q, n)
    reject_proj = _P0 if accept_bit == 1 else _P1
    if steps:
        _local_terms(parts["out"], _kron(reject_proj, _P1), [0, cq[steps]], n)
    else:
        _local_terms(parts["out"], reject_proj, [0], n)
    return parts, n


def _assemble(parts: dict, n: int) -> tuple[list, dict]:
    total: dict = {}
    for acc in parts.values():
        for key, c in acc.items():
            total[key] = total.get(key, 0.0) + c
    return _finish(total, n), {name: _finish(acc, n) for name, acc in parts.items()}


def decision_energies(gates: Sequence, x: Sequence[int]) -> tuple[float, float]:
    """Ground energies with the output penalty on |0> (accept test) and on |1>."""
    gates = _check_fk(gates, x)
    out = []
    for bit in (1, 0):
        parts, n = _clock_parts(gates, x, bit)
        terms, _ = _assemble(parts, n)
        out.append(ClockHamiltonian(terms, n).ground_energy())
    return out[0], out[1]


def build_clock_hamiltonian(gates: Sequence, x: Sequence[int]) -> ClockHamiltonian:
    """Unary-clock Hamiltonian H_in + H_clock + H_prop + H_out; accept means output bit 1.

    Thresholds come from the two decision energies: with E the smaller and
    G their difference, a = E + G/3 and b = E + 2G/3.
    """
    gates = _check_fk(gates, x)
    parts, n = _clock_parts(gates, x, 1)
    terms, split = _assemble(parts, n)
    e_acc, e_rej = decision_energies(gates, x)
    low, gap = min(e_acc, e_rej), abs(e_acc - e_rej)
    if gap < 1e-9:
        raise ValueError("instance has no decision gap; both outputs are equally likely")
    h = ClockHamiltonian(terms, n, low + gap / 3, low + 2 * gap / 3)
    h.parts = split
    return h


@dataclass(frozen=True)
class EnergyEstimate:
    value: float
    samples: int
    low: float
    high: float

    def to_dict(self) -> dict:
        return {"value": self.value, "samples": self.samples, "low": self.low, "high": self.high}


def estimate_energy(h: ClockHamiltonian, states: Sequence[tuple[StateVector, int]], rng: np.random.Generator,
                    confidence: float = 0.95) -> EnergyEstimate:
    """Sample one term per state (probability ∝ |a_i|), measure it, rescale.

    ``states`` lists (state, number of rounds using it). Each round measures
    the sampled hermitian Pauli string once, which is the same as measuring
    its X/Z factors one qubit at a time and multiplying the ±1 outcomes.
    """
    live = [(c, p) for c, p in h.terms if not p.is_identity()]
    weights = np.array([abs(c) for c, _ in live])
    signs = np.sign([c for c, _ in live])
    total_w = weights.sum()
    probs = weights / total_w
    acc = []
    for state, count in states:
        if count <= 0:
            continue
        if state.num_qubits != h.num_qubits:
            raise ProtocolViolation("state size does not match the Hamiltonian")
        v = state.amplitudes
        ev = np.array([np.vdot(v, p.to_matrix() @ v).real for _, p in live])
        idx = rng.choice(len(live), size=count, p=probs)
        plus = rng.random(count) < (1 + ev[idx]) / 2
        acc.append(signs[idx] * np.where(plus, 1.0, -1.0))
    draws = np.concatenate(acc) if acc else np.zeros(0)
    if draws.size == 0:
        raise ValueError("no rounds to estimate from")
    mean = float(draws.mean())
    sd = float(draws.std(ddof=1)) if draws.size > 1 else 1.0
    half = float(norm.ppf((1 + confidence) / 2)) * sd / math.sqrt(draws.size)
    base = h.identity_offset
    return EnergyEstimate(base + total_w * mean, int(draws.size), base + total_w * (mean - half),
                          base + total_w * (mean + half))


def calibrated_repetitions(h: ClockHamiltonian) -> int:
    """Rounds R = (z W / m)^2 with z the one-sided 95% quantile.

    W is the total term weight, which bounds the spread of one rescaled draw,
    and m = 1.5 (b - a) is the distance from the lower decision energy to the
    cut (a + b) / 2. With R rounds an honest estimate clears the cut with
    probability at least 0.95 by the normal approximation.
    """
    margin = 1.5 * (h.b - h.a)
    return int(math.ceil((Z95 * h.weight / margin) ** 2))


class PosthocProver(Prover):
    """Sends the claimed ground state each round.

    Modes: ``fk`` sends the history state, ``ground`` the exact ground state of
    the public Hamiltonian, ``random-basis`` a fresh random computational basis
    state every round.
    """

    protocol = "posthoc"

    def __init__(self, attack=None, rng=None, mode: str = "fk"):
        super().__init__(attack, rng)
        if mode not in ("fk", "ground", "random-basis"):
            raise ValueError(f"unknown mode {mode!r}")
        self.mode = mode

    def on_state_request(self, payload, _):
        gates = circ.parse_circuit(payload["circuit"])
        x = list(payload["x"])
        rounds = int(payload["rounds"])
        n = int(payload["num_qubits"])
        if self.mode == "fk":
            batch = [(fk_state(gates, x), rounds)]
        elif self.mode == "ground":
            h = ClockHamiltonian.from_dict(payload["hamiltonian"])
            _, vecs = np.linalg.eigh(h.matrix())
            batch = [(StateVector.from_amplitudes(vecs[:, 0]), rounds)]
        else:
            counts = Counter(int(i) for i in self.rng.integers(0, 2**n, rounds))
            batch = [(qsim.basis_state([(i >> (n - 1 - q)) & 1 for q in range(n)]), c) for i, c in sorted(counts.items())]
        if self.attack.kind == "pauli":
            batch = [(qsim.apply_circuit(s, [(m, (q,)) for q, m in self.attack.local_ops()]), c) for s, c in batch]
        return batch


def posthoc_run(
    gates: Sequence,
    x: Sequence[int],
    prover: Prover | None = None,
    repetitions: int | None = None,
    rng: np.random.Generator | None = None,
    seed: int | None = None,
    hamiltonian: ClockHamiltonian | None = None,
) -> ProtocolOutcome:
    """Estimate the energy of the prover's states; accept iff it is below (a+b)/2.

    ``repetitions=None`` uses ``calibrated_repetitions``. The output bit is 1
    on acceptance, and ``correct`` compares it with the circuit's majority output.
    """
    gates = _check_fk(gates, x)
    h = hamiltonian or build_clock_hamiltonian(gates, x)
    reps = calibrated_repetitions(h) if repetitions is None else int(repetitions)
    if reps < 1:
        raise ValueError("repetitions must be at least 1")
    rng = rng if rng is not None else np.random.default_rng(seed)
    prover = prover or PosthocProver()
    prover.bind(np.random.default_rng(rng.integers(2**63)))
    tr = Transcript("posthoc", seed)
    payload = {"circuit": circ.format_circuit(gates), "x": list(x), "rounds": reps,
               "num_qubits": h.num_qubits, "hamiltonian": h.to_dict()}
    try:
        msg = tr.send("state-request", payload)
        batch = prover.respond(msg, final=True)
        if sum(c for _, c in batch) != reps:
            raise ProtocolViolation("prover sent the wrong number of states")
        tr.reply(msg, "qubit-return", {"count": reps})
        est = estimate_energy(h, batch, rng)
    except ProtocolViolation as exc:
        tr.hidden.extra["abort"] = str(exc)
        return tr.finish(ProtocolOutcome(False, (), None))
    tr.note("term-request", {"rounds": reps, "estimate": est.value, "threshold": (h.a + h.b) / 2})
    accepted = est.value < (h.a + h.b) / 2
    truth = circ.simulate(gates, len(x), list(x)).probabilities() if gates else qsim.basis_state(list(x)).probabilities()
    p_one = float(truth.reshape(2, -1)[1].sum())
    outcome = ProtocolOutcome(accepted, (int(accepted),), bool(accepted) == (p_one > 0.5))
    tr.hidden.extra["estimate"] = est.to_dict()
    return tr.finish(outcome)
