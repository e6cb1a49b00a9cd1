"""Two non-communicating provers sharing entanglement: CHSH games and remote preparation.

Each prover only ever gets a ``ProverHandle`` that addresses qubits by local
index inside its own partition, so no code path lets one prover touch the
other's register.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import qsim, stats
from .qsim import StateVector

TSIRELSON = float(np.cos(np.pi / 8) ** 2)
_S2 = 1 / np.sqrt(2)
_X, _Y, _Z = qsim.GATES["X"], qsim.GATES["Y"], qsim.GATES["Z"]

OBSERVABLES = {
    "X": _X,
    "Y": _Y,
    "Z": _Z,
    "(X+Z)/√2": (_X + _Z) * _S2,
    "(X-Z)/√2": (_X - _Z) * _S2,
    "(Y+Z)/√2": (_Y + _Z) * _S2,
    "(Y-Z)/√2": (_Y - _Z) * _S2,
    "(X+Y)/√2": (_X + _Y) * _S2,
    "(X-Y)/√2": (_X - _Y) * _S2,
}
_ALIASES = {k.replace("√", "sqrt"): k for k in OBSERVABLES} | {k[1:4]: k for k in OBSERVABLES if k.startswith("(")}


def phi_plus() -> StateVector:
    return StateVector(2, np.array([1, 0, 0, 1], dtype=complex) * _S2)


@dataclass(frozen=True)
class ObservableSpec:
    label: str
    target: int = 0

    def __post_init__(self):
        label = _ALIASES.get(self.label, self.label)
        if label not in OBSERVABLES:
            raise ValueError(f"observable {self.label!r} is not in {sorted(OBSERVABLES)}")
        object.__setattr__(self, "label", label)

    @property
    def matrix(self) -> np.ndarray:
        return OBSERVABLES[self.label]

    def projectors(self) -> tuple[np.ndarray, np.ndarray]:
        """(+1 eigenprojector, -1 eigenprojector)."""
        m = self.matrix
        eye = np.eye(2, dtype=complex)
        return (eye + m) / 2, (eye - m) / 2


class ProverHandle:
    """One prover's access to its own registers, addressed 0..size-1."""

    __slots__ = ("_system", "_qubits", "name")

    def __init__(self, system: "TwoProverSystem", name: str, qubits: tuple):
        self._system = system
        self._qubits = qubits
        self.name = name

    @property
    def size(self) -> int:
        return len(self._qubits)

    def _global(self, local: Sequence[int]) -> list[int]:
        out = []
        for q in local:
            if not 0 <= q < len(self._qubits):
                raise IndexError(f"prover {self.name} has no local qubit {q}")
            out.append(self._qubits[q])
        return out

    def apply(self, matrix: np.ndarray, local: Sequence[int]) -> None:
        self._system._apply(matrix, self._global(local))

    def measure(self, obs: ObservableSpec, rng: np.random.Generator) -> int:
        """Measure an observable on a local qubit; returns the ±1 outcome."""
        (q,) = self._global([obs.target])
        return self._system._measure(obs, q, rng)


class TwoProverSystem:
    """Shared state with a fixed split into prover A and prover B registers."""

    def __init__(self, joint_state: StateVector, partition: tuple[Sequence[int], Sequence[int]]):
        a, b = (tuple(int(q) for q in part) for part in partition)
        n = joint_state.num_qubits
        if set(a) & set(b) or sorted(a + b) != list(range(n)):
            raise ValueError("partition must be disjoint and cover every qubit")
        self._vec = joint_state.amplitudes.copy()
        self._n = n
        self.partition = (a, b)
        self._handles = {"A": ProverHandle(self, "A", a), "B": ProverHandle(self, "B", b)}

    @classmethod
    def bell_pair(cls) -> "TwoProverSystem":
        return cls(phi_plus(), ((0,), (1,)))

    def prover(self, side: str) -> ProverHandle:
        if side not in self._handles:
            raise ValueError("side must be 'A' or 'B'")
        return self._handles[side]

    @property
    def state(self) -> StateVector:
        """Referee-side snapshot of the joint state (provers never get this)."""
        return StateVector(self._n, self._vec.copy())

    def _apply(self, matrix, qubits) -> None:
        self._vec = qsim.apply_matrix(self._vec, self._n, np.asarray(matrix, dtype=complex), qubits)

    def _measure(self, obs: ObservableSpec, q: int, rng: np.random.Generator) -> int:
        plus, minus = obs.projectors()
        branch = qsim.apply_matrix(self._vec, self._n, plus, [q])
        p_plus = float(np.vdot(branch, branch).real)
        if rng.random() >= p_plus:
            branch = qsim.apply_matrix(self._vec, self._n, minus, [q])
            out = -1
        else:
            out = 1
        self._vec = branch / np.linalg.norm(branch)
        return out

    def partner_state(self, side: str) -> StateVector:
        """Pure state of a single-qubit partner after the other side collapsed."""
        a, b = self.partition
        mine = self.prover(side)._qubits
        other = b if mine == a else a
        if len(other) != 1:
            raise ValueError("partner must be a single qubit")
        rho = qsim.partial_trace(qsim.DensityMatrix(self._n, np.outer(self._vec, self._vec.conj())), other).matrix
        vals, vecs = np.linalg.eigh(rho)
        if vals[-1] < 1 - 1e-9:
            raise ValueError("partner is not in a pure state")
        return StateVector(1, vecs[:, -1])


@dataclass(frozen=True)
class GameRecord:
    a: int
    b: int
    x: int
    y: int
    won: bool

    def __post_init__(self):
        if self.won != ((self.a & self.b) == (self.x ^ self.y)):
            raise ValueError("won must equal (a AND b) == (x XOR y)")

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "x": self.x, "y": self.y, "won": self.won}


def bit_of(outcome: int) -> int:
    """Eigenvalue +1 is bit 0."""
    return 0 if outcome == 1 else 1


@dataclass(frozen=True)
class ClassicalStrategy:
    """Deterministic local tables: x = table[a], y = table[2 + b]."""

    table: tuple

    def __post_init__(self):
        t = tuple(int(v) for v in self.table)
        if len(t) != 4 or any(v not in (0, 1) for v in t):
            raise ValueError("a classical strategy is four bits (x0, x1, y0, y1)")
        object.__setattr__(self, "table", t)

    def value(self) -> float:
        wins = sum((a & b) == (self.table[a] ^ self.table[2 + b]) for a in (0, 1) for b in (0, 1))
        return wins / 4


# Bob's second ideal observable sits outside the remote-preparation set
STRATEGY_OBSERVABLES = OBSERVABLES | {"(Z-X)/√2": (_Z - _X) * _S2}


def _resolve(label: str) -> str:
    label = _ALIASES.get(label, label)
    if label not in STRATEGY_OBSERVABLES:
        raise ValueError(f"unknown observable {label!r}")
    return label


@dataclass(frozen=True)
class QuantumStrategy:
    """Observables per input on a shared Bell pair; ``deviation`` acts on A's qubit first."""

    alice: tuple = ("Z", "X")
    bob: tuple = ("(X+Z)/√2", "(Z-X)/√2")
    deviation: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "alice", tuple(_resolve(o) for o in self.alice))
        object.__setattr__(self, "bob", tuple(_resolve(o) for o in self.bob))
        if len(self.alice) != 2 or len(self.bob) != 2:
            raise ValueError("one observable per input bit")

    def observable(self, side: str, bit: int) -> np.ndarray:
        return STRATEGY_OBSERVABLES[(self.alice if side == "A" else self.bob)[bit]]


def ideal_strategy() -> QuantumStrategy:
    return QuantumStrategy()


def _joint_table(strategy: QuantumStrategy) -> np.ndarray:
    """p[a, b, x, y] from projectors on the (possibly deviated) Bell pair."""
    psi = phi_plus().amplitudes
    if strategy.deviation is not None:
        psi = np.kron(np.asarray(strategy.deviation, dtype=complex), np.eye(2)) @ psi
    table = np.zeros((2, 2, 2, 2))
    eye = np.eye(2, dtype=complex)
    for a, b in itertools.product((0, 1), repeat=2):
        oa, ob = strategy.observable("A", a), strategy.observable("B", b)
        for x, y in itertools.product((0, 1), repeat=2):
            pa = (eye + (-1) ** x * oa) / 2
            pb = (eye + (-1) ** y * ob) / 2
            v = np.kron(pa, pb) @ psi
            table[a, b, x, y] = float(np.vdot(v, v).real)
    return table


def win_probability(strategy) -> float:
    """Exact win probability under uniform inputs."""
    if isinstance(strategy, ClassicalStrategy):
        return strategy.value()
    p = _joint_table(strategy)
    return float(sum(p[a, b, x, y] for a, b, x, y in itertools.product((0, 1), repeat=4) if (a & b) == (x ^ y)) / 4)


def play_game(strategy, a: int, b: int, rng: np.random.Generator) -> GameRecord:
    """One referee round with explicit sequential measurements."""
    if isinstance(strategy, ClassicalStrategy):
        x, y = strategy.table[a], strategy.table[2 + b]
    else:
        system = TwoProverSystem.bell_pair()
        alice, bob = system.prover("A"), system.prover("B")
        if strategy.deviation is not None:
            alice.apply(strategy.deviation, [0])
        x = bit_of(_measure_matrix(alice, strategy.observable("A", a), rng))
        y = bit_of(_measure_matrix(bob, strategy.observable("B", b), rng))
    return GameRecord(a, b, x, y, (a & b) == (x ^ y))


def _measure_matrix(handle: ProverHandle, m: np.ndarray, rng) -> int:
    # rotate so that the observable becomes Z, measure Z, rotate back
    vals, vecs = np.linalg.eigh(m)
    u = vecs[:, ::-1].conj().T  # +1 eigenvector first
    handle.apply(u, [0])
    out = handle.measure(ObservableSpec("Z"), rng)
    handle.apply(u.conj().T, [0])
    return out


@dataclass(frozen=True)
class CampaignResult:
    wins: int
    games: int
    estimate: stats.Estimate
    records: tuple = ()

    @property
    def rate(self) -> float:
        return self.wins / self.games


def chsh_campaign(strategy, games: int, rng: np.random.Generator, keep_records: bool = False,
                  exact_rounds: int = 0) -> CampaignResult:
    """Play ``games`` independent rounds with uniform referee inputs.

    The first ``exact_rounds`` games run through ``play_game`` with explicit
    collapse. The rest sample A's outcome, then B's conditional outcome, from
    the same projector table, which has the same distribution.
    """
    if games < 1:
        raise ValueError("games must be positive")
    if isinstance(strategy, str):
        strategy = {"ideal": ideal_strategy}[strategy]()
    records = []
    wins = 0
    slow = min(exact_rounds, games)
    for _ in range(slow):
        a, b = (int(v) for v in rng.integers(0, 2, 2))
        rec = play_game(strategy, a, b, rng)
        wins += rec.won
        if keep_records:
            records.append(rec)
    rest = games - slow
    if rest:
        a = rng.integers(0, 2, rest)
        b = rng.integers(0, 2, rest)
        if isinstance(strategy, ClassicalStrategy):
            t = np.array(strategy.table)
            x, y = t[a], t[2 + b]
        else:
            p = _joint_table(strategy)
            px1 = p[a, b, 1, :].sum(axis=1)  # marginal of A does not depend on b
            x = (rng.random(rest) < px1).astype(int)
            joint = p[a, b, x, :]
            y = (rng.random(rest) < joint[:, 1] / joint.sum(axis=1)).astype(int)
        won = (a & b) == (x ^ y)
        wins += int(won.sum())
        if keep_records:
            records += [GameRecord(int(i), int(j), int(u), int(v), bool(w)) for i, j, u, v, w in zip(a, b, x, y, won)]
    return CampaignResult(wins, games, stats.wilson(wins, games), tuple(records))


def all_classical_strategies() -> list[ClassicalStrategy]:
    return [ClassicalStrategy(t) for t in itertools.product((0, 1), repeat=4)]


def classical_chsh_bound() -> float:
    """Best deterministic value over all 16 local tables."""
    return max(s.value() for s in all_classical_strategies())


def rigidity_threshold_check(win_rate: float, n: int, eps: float) -> bool:
    """Acceptance gate: win rate at least (1 - eps) cos^2(pi/8)."""
    if n < 1:
        raise ValueError("n must be positive")
    return bool(win_rate >= (1 - eps) * TSIRELSON - 1e-15)


def remote_prepare(system: TwoProverSystem, side: str, obs: ObservableSpec,
                   rng: np.random.Generator) -> tuple[int, StateVector]:
    """Measure one half of a Bell pair; return the outcome and the collapsed partner.

    On |Phi+> an outcome with eigenvector |e> leaves the partner in conj(|e>),
    so (X+Y)/sqrt2 with outcome +1 prepares |+_{-pi/4}>.
    """
    st = system.state
    if st.num_qubits != 2 or any(len(p) != 1 for p in system.partition):
        raise ValueError("remote preparation needs a two-qubit system split one and one")
    if qsim.fidelity(st, phi_plus()) < 1 - 1e-9:
        raise ValueError("joint state is not |Phi+>")
    out = system.prover(side).measure(ObservableSpec(obs.label, 0), rng)
    return out, system.partner_state(side)


def resource_states() -> dict[str, StateVector]:
    """The VUBQC resource set: |+_theta> for theta = 0..7 and |0>, |1>."""
    out = {f"+{k}": qsim.plus_state(k) for k in range(8)}
    out["0"] = qsim.basis_state([0])
    out["1"] = qsim.basis_state([1])
    return out


def identify_resource(state: StateVector, tol: float = 1e-9) -> str | None:
    for name, ref in resource_states().items():
        if qsim.fidelity(state, ref) > 1 - tol:
            return name
    return None
