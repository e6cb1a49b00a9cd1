"""Gate-list circuits: text format, direct simulation and random generation.

A circuit is a tuple of ``(name, targets)`` pairs. Text form is
``"H 0; CNOT 0 1; T 1"``.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from . import qsim
from .qsim import StateVector

Gate = tuple  # (name, (targets...))

ARITY = {"I": 1, "H": 1, "S": 1, "SDG": 1, "T": 1, "TDG": 1, "X": 1, "Y": 1, "Z": 1, "CNOT": 2, "CZ": 2, "SWAP": 2, "CCNOT": 3}


def normalize(circuit: Iterable) -> tuple:
    out = []
    for name, targets in circuit:
        name = name.upper()
        if name == "CX":
            name = "CNOT"
        if name not in ARITY:
            raise ValueError(f"unsupported gate {name!r}")
        targets = tuple(int(t) for t in (targets if isinstance(targets, (tuple, list)) else (targets,)))
        if len(targets) != ARITY[name] or len(set(targets)) != len(targets):
            raise ValueError(f"bad targets {targets} for {name}")
        out.append((name, targets))
    return tuple(out)


def parse_circuit(text: str) -> tuple:
    gates = []
    for chunk in text.replace("\n", ";").split(";"):
        parts = chunk.split()
        if parts:
            gates.append((parts[0], tuple(int(p) for p in parts[1:])))
    return normalize(gates)


def format_circuit(circuit: Sequence[Gate]) -> str:
    return "; ".join(" ".join([name, *map(str, targets)]) for name, targets in circuit)


def width(circuit: Sequence[Gate]) -> int:
    return 1 + max((t for _, ts in circuit for t in ts), default=0)


def depth(circuit: Sequence[Gate]) -> int:
    """Number of moments after as-soon-as-possible layering."""
    front: dict[int, int] = {}
    best = 0
    for _, targets in circuit:
        layer = 1 + max((front.get(t, 0) for t in targets), default=0)
        for t in targets:
            front[t] = layer
        best = max(best, layer)
    return best


def as_input(n: int, inp) -> StateVector:
    if inp is None:
        return qsim.zero_state(n)
    if isinstance(inp, StateVector):
        return inp
    return qsim.basis_state(inp)


def simulate(circuit: Sequence[Gate], n: int, inp=None) -> StateVector:
    """Direct state-vector evaluation on ``inp`` (bits or a StateVector; default |0...0>)."""
    state = as_input(n, inp)
    for name, targets in normalize(circuit):
        state = qsim.apply_unitary(state, name, targets)
    return state


def unitary(circuit: Sequence[Gate], n: int) -> np.ndarray:
    u = np.eye(2**n, dtype=complex)
    for name, targets in normalize(circuit):
        cols = [qsim.apply_matrix(u[:, j], n, qsim.GATES[name], targets) for j in range(2**n)]
        u = np.stack(cols, axis=1)
    return u


def output_distribution(circuit: Sequence[Gate], n: int, inp=None) -> np.ndarray:
    return simulate(circuit, n, inp).probabilities()


def random_circuit(
    n: int,
    max_depth: int,
    rng: np.random.Generator,
    gate_set: Sequence[str] = ("H", "S", "T", "X", "Z", "CNOT"),
    num_gates: int | None = None,
) -> tuple:
    """Random gate list on n wires whose ASAP depth is at most ``max_depth``."""
    singles = [g for g in gate_set if ARITY[g] == 1]
    doubles = [g for g in gate_set if ARITY[g] == 2] if n > 1 else []
    target = num_gates if num_gates is not None else int(rng.integers(1, max_depth * n + 1))
    gates: list = []
    for _ in range(20 * target):
        if len(gates) >= target:
            break
        if doubles and rng.random() < 0.35:
            a, b = rng.choice(n, size=2, replace=False)
            g = (str(rng.choice(doubles)), (int(a), int(b)))
        else:
            g = (str(rng.choice(singles)), (int(rng.integers(n)),))
        if depth(gates + [g]) <= max_depth:
            gates.append(g)
    return tuple(gates)


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    return float(0.5 * np.abs(np.asarray(p) - np.asarray(q)).sum())
