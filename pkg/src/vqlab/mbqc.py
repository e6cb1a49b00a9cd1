"""Graph states, measurement patterns and a brickwork compiler.

Measuring vertex v at angle a projects onto |+-_a> = (|0> +- e^{i a pi/4}|1>)/sqrt2;
outcome 0 is the ``+`` branch. A single teleportation step on a chain maps the
logical state psi to X^s H P(-a) psi with P(a) = diag(1, e^{i a pi/4}).

A pattern records, per measured vertex, the base angle phi_v with two signal
sets. The angle actually used is (-1)^{s(S_v)} phi_v + 4 s(R_v) mod 8 where
s(.) is the parity of earlier outcomes. Output vertices carry byproduct sets
so that the residual state equals X^x Z^z |out>.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from . import circuit as circ
from . import qsim
from .pauli import PauliOperator
from .qsim import StateVector

MAX_GRAPH_QUBITS = 16
MAX_BRICK_WIDTH = 3
MAX_BRICK_DEPTH = 6

_PLUS = np.array([1, 1], dtype=complex) / np.sqrt(2)


@dataclass(frozen=True)
class Graph:
    vertices: tuple
    edges: frozenset

    def __post_init__(self):
        verts = tuple(int(v) for v in self.vertices)
        if len(set(verts)) != len(verts):
            raise ValueError("duplicate vertex")
        vs = set(verts)
        edges = set()
        for a, b in self.edges:
            a, b = int(a), int(b)
            if a == b:
                raise ValueError(f"self-loop at {a}")
            if a not in vs or b not in vs:
                raise ValueError(f"edge ({a}, {b}) uses an unknown vertex")
            e = (min(a, b), max(a, b))
            if e in edges:
                raise ValueError(f"duplicate edge {e}")
            edges.add(e)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "edges", frozenset(edges))
        adj = {v: set() for v in verts}
        for a, b in edges:
            adj[a].add(b)
            adj[b].add(a)
        object.__setattr__(self, "_adj", {v: frozenset(n) for v, n in adj.items()})

    @classmethod
    def from_edges(cls, edges: Iterable, vertices: Iterable | None = None) -> "Graph":
        edges = [tuple(e) for e in edges]
        if vertices is None:
            vertices = sorted({v for e in edges for v in e})
        return cls(tuple(vertices), edges)

    @classmethod
    def path(cls, n: int) -> "Graph":
        return cls(tuple(range(n)), frozenset((i, i + 1) for i in range(n - 1)))

    @classmethod
    def cycle(cls, n: int) -> "Graph":
        if n < 3:
            raise ValueError("a cycle needs at least 3 vertices")
        return cls(tuple(range(n)), frozenset((i, (i + 1) % n) for i in range(n)))

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    def neighbors(self, v: int) -> frozenset:
        return self._adj[v]

    def index(self, v: int) -> int:
        return self.vertices.index(v)

    def to_dict(self) -> dict:
        return {"vertices": list(self.vertices), "edges": [list(e) for e in sorted(self.edges)]}


@dataclass(frozen=True)
class GraphState:
    graph: Graph
    state: StateVector


def _cz_inplace(vec: np.ndarray, n: int, i: int, j: int) -> None:
    if i > j:
        i, j = j, i
    view = vec.reshape(2**i, 2, 2 ** (j - i - 1), 2, 2 ** (n - j - 1))
    view[:, 1, :, 1, :] *= -1


def build_graph_state(graph: Graph, cap: int = MAX_GRAPH_QUBITS) -> GraphState:
    """|+>^n followed by CZ on every edge; qubit k is ``graph.vertices[k]``."""
    n = graph.num_vertices
    if n > cap:
        raise ValueError(f"graph has {n} vertices, cap is {cap}")
    vec = np.full(2**n, 2 ** (-n / 2), dtype=complex)
    idx = {v: k for k, v in enumerate(graph.vertices)}
    for a, b in graph.edges:
        _cz_inplace(vec, n, idx[a], idx[b])
    return GraphState(graph, StateVector(n, vec))


def stabilizer_generators(graph: Graph) -> list[PauliOperator]:
    """K_v = X_v prod_{w in N(v)} Z_w, one per vertex, in vertex order."""
    n = graph.num_vertices
    idx = {v: k for k, v in enumerate(graph.vertices)}
    gens = []
    for v in graph.vertices:
        z = 0
        for w in graph.neighbors(v):
            z |= 1 << idx[w]
        gens.append(PauliOperator(n, 1 << idx[v], z, 0))
    return gens


def stabilizer_residuals(gs: GraphState) -> list[float]:
    """max |K_v|G> - |G>| per vertex."""
    out = []
    for k in stabilizer_generators(gs.graph):
        kv = k.to_matrix() @ gs.state.amplitudes
        out.append(float(np.max(np.abs(kv - gs.state.amplitudes))))
    return out


@dataclass(frozen=True)
class MeasurementPattern:
    """Graph plus an adaptive measurement schedule.

    ``inputs`` are vertices whose initial state is supplied by the caller.
    ``readout`` lists measured vertices whose raw outcomes are the classical
    result of the computation.
    """

    graph: Graph
    order: tuple
    angles: Mapping
    s_deps: Mapping
    r_deps: Mapping
    inputs: tuple = ()
    outputs: tuple = ()
    readout: tuple = ()
    output_x: Mapping = field(default_factory=dict)
    output_z: Mapping = field(default_factory=dict)

    def __post_init__(self):
        g = self.graph
        order = tuple(int(v) for v in self.order)
        outputs = tuple(int(v) for v in self.outputs)
        if len(set(order)) != len(order):
            raise ValueError("vertex measured twice")
        if set(order) & set(outputs):
            raise ValueError("output vertex is measured")
        if set(order) | set(outputs) != set(g.vertices):
            raise ValueError("every vertex must be measured or be an output")
        pos = {v: k for k, v in enumerate(order)}
        norm = {}
        for name in ("s_deps", "r_deps"):
            deps = {int(v): frozenset(int(u) for u in getattr(self, name).get(v, ())) for v in order}
            for v, ds in deps.items():
                for u in ds:
                    if u not in pos or pos[u] >= pos[v]:
                        raise ValueError(f"{name}[{v}] references {u}, which is not measured earlier")
            norm[name] = deps
        for name in ("output_x", "output_z"):
            deps = {int(v): frozenset(int(u) for u in getattr(self, name).get(v, ())) for v in outputs}
            for v, ds in deps.items():
                if not ds <= set(order):
                    raise ValueError(f"{name}[{v}] references an unmeasured vertex")
            norm[name] = deps
        angles = {int(v): int(self.angles.get(v, 0)) % 8 for v in order}
        if not set(self.readout) <= set(order):
            raise ValueError("readout vertices must be measured")
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "outputs", outputs)
        object.__setattr__(self, "inputs", tuple(int(v) for v in self.inputs))
        object.__setattr__(self, "readout", tuple(int(v) for v in self.readout))
        object.__setattr__(self, "angles", angles)
        for name, deps in norm.items():
            object.__setattr__(self, name, deps)

    @property
    def num_qubits(self) -> int:
        return self.graph.num_vertices

    def corrected_angle(self, v: int, outcomes: Mapping[int, int], base: int | None = None) -> int:
        phi = self.angles[v] if base is None else base
        s = sum(outcomes[u] for u in self.s_deps[v]) & 1
        r = sum(outcomes[u] for u in self.r_deps[v]) & 1
        return ((-1) ** s * phi + 4 * r) % 8

    def with_angles(self, angles: Mapping[int, int]) -> "MeasurementPattern":
        merged = dict(self.angles)
        merged.update(angles)
        return MeasurementPattern(self.graph, self.order, merged, self.s_deps, self.r_deps, self.inputs,
                                  self.outputs, self.readout, self.output_x, self.output_z)

    def to_dict(self) -> dict:
        sets = lambda m: {str(v): sorted(m[v]) for v in sorted(m)}  # noqa: E731
        return {
            "graph": self.graph.to_dict(),
            "order": list(self.order),
            "angles": {str(v): self.angles[v] for v in sorted(self.angles)},
            "s_deps": sets(self.s_deps),
            "r_deps": sets(self.r_deps),
            "inputs": list(self.inputs),
            "outputs": list(self.outputs),
            "readout": list(self.readout),
            "output_x": sets(self.output_x),
            "output_z": sets(self.output_z),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: Mapping) -> "MeasurementPattern":
        g = d["graph"]
        graph = Graph(tuple(g["vertices"]), frozenset(tuple(e) for e in g["edges"]))
        ints = lambda m: {int(k): v for k, v in m.items()}  # noqa: E731
        return cls(graph, tuple(d["order"]), ints(d["angles"]), ints(d["s_deps"]), ints(d["r_deps"]),
                   tuple(d.get("inputs", ())), tuple(d.get("outputs", ())), tuple(d.get("readout", ())),
                   ints(d.get("output_x", {})), ints(d.get("output_z", {})))

    @classmethod
    def from_json(cls, text: str) -> "MeasurementPattern":
        return cls.from_dict(json.loads(text))


class LazyGraphRegister:
    """Graph-state register that only holds qubits near the measurement front.

    A vertex is materialized (in its prepared single-qubit state) when it or
    a neighbor is touched. Each CZ is applied once both endpoints are live, and
    measured qubits are dropped, so memory follows the pattern's width.
    """

    def __init__(self, graph: Graph, prepared: Mapping[int, np.ndarray] | None = None,
                 input_vertices: Sequence[int] = (), input_state: StateVector | None = None):
        self.graph = graph
        self.prepared = dict(prepared or {})
        self.pending = set(graph.edges)
        self.live: list[int] = []
        self.done: set[int] = set()
        self.vec = np.ones(1, dtype=complex)
        if input_vertices:
            if input_state is None:
                input_state = qsim.product_state([qsim.plus_state()] * len(input_vertices))
            if input_state.num_qubits != len(input_vertices):
                raise ValueError("input state size does not match input vertices")
            self.live = list(input_vertices)
            self.vec = input_state.amplitudes.copy()

    def _add(self, v: int) -> None:
        if v in self.done:
            raise ValueError(f"vertex {v} was already measured")
        psi = np.asarray(self.prepared.get(v, _PLUS), dtype=complex)
        self.vec = np.kron(self.vec, psi)
        self.live.append(v)
        if len(self.live) > qsim.MAX_STATE_QUBITS:
            raise MemoryError("too many live qubits")

    def materialize(self, vertices: Iterable[int]) -> None:
        for v in vertices:
            if v not in self.live:
                self._add(v)
        pos = {v: k for k, v in enumerate(self.live)}
        n = len(self.live)
        for e in [e for e in self.pending if e[0] in pos and e[1] in pos]:
            _cz_inplace(self.vec, n, pos[e[0]], pos[e[1]])
            self.pending.discard(e)

    def entangle(self, v: int) -> None:
        """Make v live with every incident edge applied."""
        self.materialize([v, *[w for w in self.graph.neighbors(v) if w not in self.done]])

    def apply(self, v: int, matrix: np.ndarray, entangled: bool = True) -> None:
        """Apply a single-qubit matrix to vertex v, optionally after its edges."""
        if entangled:
            self.entangle(v)
        elif v not in self.live:
            if any(e for e in self.graph.edges if v in e and e not in self.pending):
                raise ValueError("vertex already entangled")
            self._add(v)
        k = self.live.index(v)
        self.vec = qsim.apply_matrix(self.vec, len(self.live), np.asarray(matrix, dtype=complex), [k])

    def measure(self, v: int, angle: int, u: float, force: int | None = None) -> tuple[int, float]:
        self.entangle(v)
        k = self.live.index(v)
        outcome, p, rest = qsim.measure_xy_discard(self.vec, len(self.live), k, angle, u, force)
        self.vec = rest
        self.live.pop(k)
        self.done.add(v)
        return outcome, p

    def measure_z(self, v: int, u: float) -> int:
        """Computational-basis measurement, realized as H then angle 0."""
        self.entangle(v)
        self.apply(v, qsim.GATES["H"])
        return self.measure(v, 0, u)[0]

    def state_of(self, vertices: Sequence[int]) -> StateVector:
        self.materialize(vertices)
        if sorted(self.live) != sorted(vertices):
            raise ValueError("register still holds other qubits")
        perm = [self.live.index(v) for v in vertices]
        n = len(self.live)
        if n == 0:
            return StateVector(0, self.vec.copy())
        psi = np.transpose(self.vec.reshape((2,) * n), perm).reshape(-1)
        return StateVector(n, psi / np.linalg.norm(psi))


class PatternRun(NamedTuple):
    outcomes: np.ndarray  # raw bits aligned with pattern.order
    output_state: StateVector | None

    def bits(self, pattern: MeasurementPattern) -> dict[int, int]:
        return dict(zip(pattern.order, (int(b) for b in self.outcomes)))


AngleOverride = Mapping[int, int] | Callable[[int, Mapping[int, int]], int] | None


def run_pattern(
    pattern: MeasurementPattern,
    rng: np.random.Generator,
    angle_override: AngleOverride = None,
    input_state: StateVector | None = None,
    prepared: Mapping[int, np.ndarray] | None = None,
) -> PatternRun:
    """Execute the pattern; returns raw outcomes and the residual output state.

    With ``angle_override`` the given angle is used verbatim for that vertex
    instead of the corrected base angle. A callable receives the vertex and the
    raw outcomes measured so far.
    """
    reg = LazyGraphRegister(pattern.graph, prepared, pattern.inputs, input_state)
    seen: dict[int, int] = {}
    out = np.zeros(len(pattern.order), dtype=np.int8)
    draws = rng.random(len(pattern.order))
    for k, v in enumerate(pattern.order):
        if angle_override is None:
            angle = pattern.corrected_angle(v, seen)
        elif callable(angle_override):
            angle = int(angle_override(v, seen))
        elif v in angle_override:
            angle = int(angle_override[v])
        else:
            angle = pattern.corrected_angle(v, seen)
        b, _ = reg.measure(v, angle, draws[k])
        seen[v] = b
        out[k] = b
    state = reg.state_of(pattern.outputs) if pattern.outputs else None
    return PatternRun(out, state)


def output_byproducts(pattern: MeasurementPattern, outcomes: Mapping[int, int]) -> list[tuple[int, int]]:
    """(x, z) byproduct bits per output vertex."""
    return [
        (sum(outcomes[u] for u in pattern.output_x[v]) & 1, sum(outcomes[u] for u in pattern.output_z[v]) & 1)
        for v in pattern.outputs
    ]


def corrected_output(pattern: MeasurementPattern, run: PatternRun) -> StateVector:
    """Undo X^x Z^z on the outputs: apply X^x, then Z^z."""
    state = run.output_state
    if state is None:
        raise ValueError("pattern has no quantum outputs")
    for k, (x, z) in enumerate(output_byproducts(pattern, run.bits(pattern))):
        if x:
            state = qsim.apply_unitary(state, "X", [k])
        if z:
            state = qsim.apply_unitary(state, "Z", [k])
    return state


def readout_bits(pattern: MeasurementPattern, run: PatternRun) -> tuple:
    bits = run.bits(pattern)
    return tuple(bits[v] for v in pattern.readout)


class PatternBuilder:
    """Incremental chain construction with byproduct-frame tracking.

    Each wire has a live vertex carrying the logical qubit as X^A Z^B psi
    where (A, B) are parity sets of earlier outcomes.
    """

    def __init__(self):
        self.vertices: list[int] = []
        self.edges: list[tuple[int, int]] = []
        self.order: list[int] = []
        self.angles: dict[int, int] = {}
        self.s_deps: dict[int, frozenset] = {}
        self.r_deps: dict[int, frozenset] = {}
        self.inputs: list[int] = []
        self.readout: list[int] = []
        self.live: list[int] = []
        self.frames: list[tuple[frozenset, frozenset]] = []

    def _vertex(self) -> int:
        v = len(self.vertices)
        self.vertices.append(v)
        return v

    def add_wire(self, is_input: bool = False) -> int:
        v = self._vertex()
        if is_input:
            self.inputs.append(v)
        self.live.append(v)
        self.frames.append((frozenset(), frozenset()))
        return len(self.live) - 1

    def step(self, wire: int, angle: int) -> int:
        """Teleport the wire one vertex along, applying H P(-angle)."""
        v = self.live[wire]
        w = self._vertex()
        self.edges.append((v, w))
        xs, zs = self.frames[wire]
        self._measure(v, angle, xs, zs)
        self.live[wire] = w
        self.frames[wire] = (frozenset({v}), xs)
        return v

    def cz(self, a: int, b: int) -> None:
        va, vb = self.live[a], self.live[b]
        self.edges.append((va, vb))
        xa, za = self.frames[a]
        xb, zb = self.frames[b]
        self.frames[a] = (xa, za ^ xb)
        self.frames[b] = (xb, zb ^ xa)

    def measure_out(self, wire: int) -> int:
        """Measure the live vertex in the X basis with byproducts folded in."""
        v = self.live[wire]
        xs, zs = self.frames[wire]
        self._measure(v, 0, xs, zs)
        self.readout.append(v)
        self.live[wire] = None
        return v

    def _measure(self, v: int, angle: int, xs: frozenset, zs: frozenset) -> None:
        self.order.append(v)
        self.angles[v] = angle % 8
        self.s_deps[v] = xs
        self.r_deps[v] = zs

    def build(self) -> MeasurementPattern:
        outputs = [v for v in self.live if v is not None]
        ox = {v: self.frames[k][0] for k, v in enumerate(self.live) if v is not None}
        oz = {v: self.frames[k][1] for k, v in enumerate(self.live) if v is not None}
        graph = Graph(tuple(self.vertices), frozenset(self.edges))
        return MeasurementPattern(graph, tuple(self.order), self.angles, self.s_deps, self.r_deps,
                                  tuple(self.inputs), tuple(outputs), tuple(self.readout), ox, oz)


def chain_pattern(angles: Sequence[int], is_input: bool = True, readout: bool = False) -> MeasurementPattern:
    """1D chain applying H P(-a_k) for each angle in turn."""
    b = PatternBuilder()
    b.add_wire(is_input)
    for a in angles:
        b.step(0, a)
    if readout:
        b.measure_out(0)
    return b.build()


# Brick table. A paired brick on wires (a, a+1) is
#   step, step, CZ, step, step, CZ
# on each wire, where step(k) = H P(-k pi/4). Entries give the four step angles
# per wire in time order. An unpaired wire takes four plain steps. Every entry
# equals its gate up to global phase (checked in tests).
PAIR_BRICKS: dict[str, tuple[tuple[int, ...], tuple[int, ...]]] = {
    "CNOT01": ((0, 0, 2, 0), (0, 2, 0, 6)), "CNOT10": ((0, 2, 0, 6), (0, 0, 2, 0)),
    "II": ((0, 0, 0, 0), (0, 0, 0, 0)), "IH": ((0, 0, 0, 0), (2, 2, 2, 0)), "IS": ((0, 0, 0, 0), (0, 0, 6, 0)),
    "IT": ((0, 0, 0, 0), (0, 0, 7, 0)), "IX": ((0, 0, 0, 0), (0, 4, 0, 0)), "IZ": ((0, 0, 0, 0), (0, 0, 4, 0)),
    "HI": ((2, 2, 2, 0), (0, 0, 0, 0)), "HH": ((2, 2, 2, 0), (2, 2, 2, 0)), "HS": ((2, 2, 2, 0), (0, 0, 6, 0)),
    "HT": ((2, 2, 2, 0), (0, 0, 7, 0)), "HX": ((2, 2, 6, 0), (0, 0, 0, 4)), "HZ": ((2, 2, 2, 0), (0, 0, 4, 0)),
    "SI": ((0, 0, 6, 0), (0, 0, 0, 0)), "SH": ((0, 0, 6, 0), (2, 2, 2, 0)), "SS": ((0, 0, 6, 0), (0, 0, 6, 0)),
    "ST": ((0, 0, 6, 0), (0, 0, 7, 0)), "SX": ((0, 0, 2, 0), (0, 0, 0, 4)), "SZ": ((0, 0, 6, 0), (0, 0, 4, 0)),
    "TI": ((0, 0, 7, 0), (0, 0, 0, 0)), "TH": ((0, 0, 7, 0), (2, 2, 2, 0)), "TS": ((0, 0, 7, 0), (0, 0, 6, 0)),
    "TT": ((0, 0, 7, 0), (0, 0, 7, 0)), "TX": ((0, 0, 3, 0), (0, 0, 0, 4)), "TZ": ((0, 0, 7, 0), (0, 0, 4, 0)),
    "XI": ((0, 4, 0, 0), (0, 0, 0, 0)), "XH": ((0, 0, 0, 4), (2, 2, 6, 0)), "XS": ((0, 0, 0, 4), (0, 0, 2, 0)),
    "XT": ((0, 0, 0, 4), (0, 0, 3, 0)), "XX": ((0, 4, 0, 0), (0, 4, 0, 0)), "XZ": ((0, 0, 0, 4), (0, 0, 0, 0)),
    "ZI": ((0, 0, 4, 0), (0, 0, 0, 0)), "ZH": ((0, 0, 4, 0), (2, 2, 2, 0)), "ZS": ((0, 0, 4, 0), (0, 0, 6, 0)),
    "ZT": ((0, 0, 4, 0), (0, 0, 7, 0)), "ZX": ((0, 0, 0, 0), (0, 0, 0, 4)), "ZZ": ((0, 0, 4, 0), (0, 0, 4, 0)),
}
SINGLE_BRICKS: dict[str, tuple[int, ...]] = {
    "I": (0, 0, 0, 0), "X": (0, 0, 0, 4), "Z": (0, 0, 4, 0), "S": (0, 0, 6, 0), "T": (0, 0, 7, 0), "H": (0, 2, 2, 2),
}
BRICK_GATES = ("H", "S", "T", "X", "Z", "CNOT")


def step_matrix(angle: int) -> np.ndarray:
    return qsim.GATES["H"] @ qsim.phase_gate(-angle)


def pair_brick_unitary(angles_a: Sequence[int], angles_b: Sequence[int]) -> np.ndarray:
    def local(k0, k1):
        return np.kron(step_matrix(angles_a[k1]) @ step_matrix(angles_a[k0]),
                       step_matrix(angles_b[k1]) @ step_matrix(angles_b[k0]))
    cz = qsim.GATES["CZ"]
    return cz @ local(2, 3) @ cz @ local(0, 1)


def single_brick_unitary(angles: Sequence[int]) -> np.ndarray:
    u = np.eye(2, dtype=complex)
    for a in angles:
        u = step_matrix(a) @ u
    return u


def layer_pairs(layer: int, width: int) -> list[tuple[int, int]]:
    return [(p, p + 1) for p in range(layer % 2, width - 1, 2)]


def _expand_cnots(gates: Sequence) -> list:
    out = []
    for name, ts in gates:
        if name == "CNOT" and abs(ts[0] - ts[1]) == 2:
            a, c = ts
            b = (a + c) // 2
            out += [("CNOT", (a, b)), ("CNOT", (b, c)), ("CNOT", (a, b)), ("CNOT", (b, c))]
        else:
            out.append((name, tuple(ts)))
    return out


@dataclass(frozen=True)
class BrickworkSpec:
    """Brick placement on a ``rows`` x ``columns`` vertex grid.

    ``slots[layer]`` maps a wire to the gate it carries in that layer; a CNOT
    occupies both wires of its pair. ``angles[(row, col)]`` is the base angle of
    the vertex at that grid position (the last column holds the outputs).
    """

    rows: int
    layers: int
    slots: tuple
    angles: Mapping

    @property
    def columns(self) -> int:
        return 4 * self.layers + 1

    @classmethod
    def from_circuit(cls, circuit: Sequence, width: int, layers: int | None = None,
                     max_depth: int = MAX_BRICK_DEPTH) -> "BrickworkSpec":
        gates = circ.normalize(circuit)
        if not 1 <= width <= MAX_BRICK_WIDTH:
            raise ValueError(f"width must be in 1..{MAX_BRICK_WIDTH}")
        for name, ts in gates:
            if name not in BRICK_GATES:
                raise ValueError(f"gate {name} is not in the brick gate set")
            if max(ts) >= width:
                raise ValueError(f"gate {name}{ts} exceeds width {width}")
        if circ.depth(gates) > max_depth:
            raise ValueError(f"circuit depth exceeds {max_depth}")
        slots: list[dict] = []
        free = [0] * width

        def slot(layer):
            while len(slots) <= layer:
                slots.append({})
            return slots[layer]

        def pair_of(layer, w):
            for p in layer_pairs(layer, width):
                if w in p:
                    return p
            return None

        for name, ts in _expand_cnots(gates):
            if name == "CNOT":
                pair = (min(ts), max(ts))
                layer = max(free[t] for t in ts)
                while pair_of(layer, pair[0]) != pair or any(w in slot(layer) for w in pair):
                    layer += 1
                s = slot(layer)
                s[pair[0]] = s[pair[1]] = ("CNOT01" if ts[0] < ts[1] else "CNOT10")
                free[ts[0]] = free[ts[1]] = layer + 1
            else:
                (w,) = ts
                layer = free[w]
                while w in slot(layer):
                    layer += 1
                slot(layer)[w] = name
                free[w] = layer + 1
        used = max(1, len(slots))
        if layers is None:
            layers = used
        elif layers < used:
            raise ValueError(f"circuit needs {used} layers")
        while len(slots) < layers:
            slots.append({})
        angles = {}
        for layer, s in enumerate(slots):
            paired = set()
            for a, b in layer_pairs(layer, width):
                paired |= {a, b}
                ga, gb = s.get(a), s.get(b)
                if ga is not None and ga.startswith("CNOT"):
                    key = ga
                else:
                    key = (ga or "I") + (gb or "I")
                qa, qb = PAIR_BRICKS[key]
                for k in range(4):
                    angles[(a, 4 * layer + k)] = qa[k]
                    angles[(b, 4 * layer + k)] = qb[k]
            for w in range(width):
                if w not in paired:
                    q = SINGLE_BRICKS[s.get(w) or "I"]
                    for k in range(4):
                        angles[(w, 4 * layer + k)] = q[k]
        frozen_slots = tuple(tuple(sorted(s.items())) for s in slots)
        return cls(width, layers, frozen_slots, angles)

    def to_pattern(self, inputs: bool = True, readout: bool = False) -> tuple[MeasurementPattern, dict]:
        """Build the pattern; also returns the (row, col) -> vertex map."""
        b = PatternBuilder()
        grid = {}
        for w in range(self.rows):
            b.add_wire(inputs)
            grid[(w, 0)] = b.live[w]

        def advance(w, col):
            b.step(w, self.angles[(w, col)])
            grid[(w, col + 1)] = b.live[w]

        for layer in range(self.layers):
            base = 4 * layer
            pairs = layer_pairs(layer, self.rows)
            for w in range(self.rows):
                advance(w, base)
                advance(w, base + 1)
            for a, c in pairs:
                b.cz(a, c)
            for w in range(self.rows):
                advance(w, base + 2)
                advance(w, base + 3)
            for a, c in pairs:
                b.cz(a, c)
        if readout:
            for w in range(self.rows):
                b.measure_out(w)
        return b.build(), grid


def compile_brickwork(circuit: Sequence, width: int | None = None, readout: bool = False,
                      inputs: bool = True, layers: int | None = None) -> MeasurementPattern:
    """Compile a gate list over {H, S, T, X, Z, CNOT} into a brickwork pattern.

    With ``inputs`` the first column takes the caller's input state; without,
    it starts in |+>. With ``readout`` a final H is appended on every wire and
    the last column is measured at angle 0, so the readout bits are the
    computational-basis outputs of the circuit.
    """
    gates = circ.normalize(circuit)
    if width is None:
        width = circ.width(gates)
    max_depth = MAX_BRICK_DEPTH
    if readout:
        if circ.depth(gates) > MAX_BRICK_DEPTH:
            raise ValueError(f"circuit depth exceeds {MAX_BRICK_DEPTH}")
        gates = gates + tuple(("H", (w,)) for w in range(width))
        max_depth += 1
    spec = BrickworkSpec.from_circuit(gates, width, layers, max_depth)
    pattern, _ = spec.to_pattern(inputs=inputs, readout=readout)
    return pattern


def sample_pattern_outputs(pattern: MeasurementPattern, rng: np.random.Generator, runs: int, shots_per_run: int,
                           input_state: StateVector | None = None) -> np.ndarray:
    """Histogram of computational-basis outputs over pattern executions.

    Each of ``runs`` executions draws fresh measurement outcomes; its
    byproduct-corrected output register is then sampled ``shots_per_run`` times.
    Returns counts indexed by the big-endian output label.
    """
    n = len(pattern.outputs) if pattern.outputs else len(pattern.readout)
    counts = np.zeros(2**n, dtype=np.int64)
    for _ in range(runs):
        run = run_pattern(pattern, rng, input_state=input_state)
        if pattern.outputs:
            probs = corrected_output(pattern, run).probabilities()
            counts += rng.multinomial(shots_per_run, probs / probs.sum())
        else:
            bits = readout_bits(pattern, run)
            counts[int("".join(map(str, bits)), 2)] += shots_per_run
    return counts


def exact_readout_distribution(pattern: MeasurementPattern, input_state: StateVector | None = None,
                               prepared: Mapping[int, np.ndarray] | None = None,
                               max_measured: int = 14) -> dict[tuple, float]:
    """Exact distribution of readout bits by enumerating every outcome branch."""
    import copy

    if len(pattern.order) > max_measured:
        raise ValueError("too many measured vertices for branch enumeration")
    dist: dict[tuple, float] = {}

    def rec(reg, k, seen, prob):
        if prob < 1e-15:
            return
        if k == len(pattern.order):
            key = tuple(seen[v] for v in pattern.readout)
            dist[key] = dist.get(key, 0.0) + prob
            return
        v = pattern.order[k]
        angle = pattern.corrected_angle(v, seen)
        for b in (0, 1):
            r2 = copy.deepcopy(reg)
            _, p = r2.measure(v, angle, 0.0, force=b)
            if p > 1e-15:
                rec(r2, k + 1, {**seen, v: b}, prob * p)

    rec(LazyGraphRegister(pattern.graph, prepared, pattern.inputs, input_state), 0, {}, 1.0)
    return dist
