"""Dense state-vector and density-matrix simulation.

Qubit 0 is the most significant tensor factor (``kron`` order). Angles in the
XY plane are integers mod 8 in units of pi/4.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

MAX_STATE_QUBITS = 18
MAX_DENSITY_QUBITS = 8
TOL = 1e-10
EIG_TOL = 1e-9

_S2 = 1 / np.sqrt(2)

GATES: dict[str, np.ndarray] = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "H": np.array([[1, 1], [1, -1]], dtype=complex) * _S2,
    "S": np.diag([1, 1j]).astype(complex),
    "SDG": np.diag([1, -1j]).astype(complex),
    "T": np.diag([1, np.exp(1j * np.pi / 4)]),
    "TDG": np.diag([1, np.exp(-1j * np.pi / 4)]),
    "CNOT": np.array(
        [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
    ),
    "CZ": np.diag([1, 1, 1, -1]).astype(complex),
    "SWAP": np.array(
        [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
    ),
}
_ccnot = np.eye(8, dtype=complex)
_ccnot[[6, 7]] = _ccnot[[7, 6]]
GATES["CCNOT"] = _ccnot
GATES["CX"] = GATES["CNOT"]
GATES["TOFFOLI"] = GATES["CCNOT"]


def phase_gate(angle: int) -> np.ndarray:
    """diag(1, e^{i angle pi/4})."""
    return np.diag([1, np.exp(1j * np.pi * (angle % 8) / 4)])


def rotation_observable(theta: float) -> np.ndarray:
    """R(theta) = cos(theta) X + sin(theta) Z."""
    return np.cos(theta) * GATES["X"] + np.sin(theta) * GATES["Z"]


def gate_matrix(gate) -> np.ndarray:
    if isinstance(gate, str):
        try:
            return GATES[gate.upper()]
        except KeyError:
            raise ValueError(f"unknown gate {gate!r}") from None
    return np.asarray(gate, dtype=complex)


@dataclass(frozen=True)
class StateVector:
    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.num_qubits > MAX_STATE_QUBITS:
            raise ValueError(f"{self.num_qubits} qubits exceeds cap {MAX_STATE_QUBITS}")
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != 2**self.num_qubits:
            raise ValueError("amplitude length does not match qubit count")
        norm = np.vdot(amps, amps).real
        if abs(norm - 1) > TOL:
            raise ValueError(f"state not normalized (norm^2={norm})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_amplitudes(cls, amps, normalize: bool = True) -> "StateVector":
        amps = np.asarray(amps, dtype=complex).reshape(-1)
        n = int(round(np.log2(amps.size)))
        if normalize:
            amps = amps / np.linalg.norm(amps)
        return cls(n, amps)

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape((2,) * self.num_qubits)

    def to_density(self) -> "DensityMatrix":
        return DensityMatrix(self.num_qubits, np.outer(self.amplitudes, self.amplitudes.conj()))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True)
class DensityMatrix:
    num_qubits: int
    matrix: np.ndarray

    def __post_init__(self):
        if self.num_qubits > MAX_DENSITY_QUBITS:
            raise ValueError(f"{self.num_qubits} qubits exceeds density cap {MAX_DENSITY_QUBITS}")
        m = np.asarray(self.matrix, dtype=complex)
        dim = 2**self.num_qubits
        if m.shape != (dim, dim):
            raise ValueError("matrix shape does not match qubit count")
        if np.max(np.abs(m - m.conj().T), initial=0) > TOL:
            raise ValueError("density matrix not hermitian")
        if abs(np.trace(m).real - 1) > TOL:
            raise ValueError("density matrix trace is not 1")
        if np.linalg.eigvalsh(m).min() < -EIG_TOL:
            raise ValueError("density matrix has negative eigenvalues")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def maximally_mixed(cls, n: int) -> "DensityMatrix":
        return cls(n, np.eye(2**n, dtype=complex) / 2**n)


@dataclass(frozen=True)
class QuditRegister:
    q: int
    num_qudits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.q < 3 or any(self.q % p == 0 for p in range(2, int(self.q**0.5) + 1)):
            raise ValueError("qudit dimension must be a prime >= 3")
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != self.q**self.num_qudits:
            raise ValueError("amplitude length does not match q^t")
        if abs(np.vdot(amps, amps).real - 1) > TOL:
            raise ValueError("qudit register not normalized")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)


@dataclass(frozen=True)
class MeasurementRecord:
    outcome: int
    post_state: object
    probability: float


# constructors


def basis_state(bits: Sequence[int] | str) -> StateVector:
    bits = [int(b) for b in bits]
    amps = np.zeros(2 ** len(bits), dtype=complex)
    amps[int("".join(map(str, bits)) or "0", 2)] = 1
    return StateVector(len(bits), amps)


def zero_state(n: int) -> StateVector:
    return basis_state([0] * n)


def plus_state(angle: int = 0, minus: bool = False) -> StateVector:
    """|+_angle> (or |-_angle>) = (|0> +- e^{i angle pi/4}|1>)/sqrt2."""
    sign = -1 if minus else 1
    return StateVector(1, np.array([1, sign * np.exp(1j * np.pi * (angle % 8) / 4)]) * _S2)


def product_state(states: Sequence[StateVector]) -> StateVector:
    amps = np.ones(1, dtype=complex)
    for s in states:
        amps = np.kron(amps, s.amplitudes)
    return StateVector(sum(s.num_qubits for s in states), amps)


def random_state(n: int, rng: np.random.Generator) -> StateVector:
    amps = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return StateVector.from_amplitudes(amps)


def random_density(n: int, rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    dim = 2**n
    rank = rank or dim
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    m = g @ g.conj().T
    return DensityMatrix(n, m / np.trace(m).real)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR with phase fix."""
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


# core kernels on raw arrays


def _check_targets(targets: Sequence[int], n: int) -> list[int]:
    targets = [int(t) for t in targets]
    if len(set(targets)) != len(targets):
        raise ValueError("targets must be distinct")
    if any(t < 0 or t >= n for t in targets):
        raise IndexError(f"target out of range for {n} qubits")
    return targets


def apply_matrix(vec: np.ndarray, n: int, mat: np.ndarray, targets: Sequence[int]) -> np.ndarray:
    """Apply a 2^k x 2^k matrix to ``targets`` of a flat 2^n vector (no checks)."""
    k = len(targets)
    if k == 1:
        t = targets[0]
        psi = vec.reshape(1 << t, 2, 1 << (n - t - 1))
        return (mat[None, :, :] @ psi).reshape(-1)
    psi = vec.reshape((2,) * n)
    m = mat.reshape((2,) * (2 * k))
    psi = np.tensordot(m, psi, axes=(list(range(k, 2 * k)), list(targets)))
    psi = np.moveaxis(psi, list(range(k)), list(targets))
    return psi.reshape(-1)


def _unitary_for(gate, k: int) -> np.ndarray:
    mat = gate_matrix(gate)
    if mat.shape != (2**k, 2**k):
        raise ValueError(f"gate of shape {mat.shape} does not act on {k} targets")
    if not isinstance(gate, str) and np.max(np.abs(mat @ mat.conj().T - np.eye(2**k))) > TOL:
        raise ValueError("matrix is not unitary")
    return mat


def apply_unitary(state, gate, targets: Sequence[int]):
    """Apply a named gate or explicit unitary to ``targets``; returns a new state."""
    n = state.num_qubits
    targets = _check_targets(targets, n)
    mat = _unitary_for(gate, len(targets))
    if isinstance(state, DensityMatrix):
        rho = state.matrix.reshape(-1)
        rho = apply_matrix(rho, 2 * n, mat, targets)
        rho = apply_matrix(rho, 2 * n, mat.conj(), [t + n for t in targets])
        return DensityMatrix(n, rho.reshape(2**n, 2**n))
    out = apply_matrix(state.amplitudes, n, mat, targets)
    return StateVector(n, out / np.linalg.norm(out))


def apply_circuit(state, gates: Sequence[tuple]) -> object:
    for gate, targets in gates:
        state = apply_unitary(state, gate, targets)
    return state


def _collapse(vec: np.ndarray, n: int, targets: list[int], outcome: int) -> tuple[np.ndarray, float]:
    k = len(targets)
    psi = np.moveaxis(vec.reshape((2,) * n), targets, list(range(k))).reshape(2**k, -1)
    branch = np.zeros_like(psi)
    branch[outcome] = psi[outcome]
    p = float(np.vdot(psi[outcome], psi[outcome]).real)
    out = np.moveaxis(branch.reshape((2,) * n), list(range(k)), targets).reshape(-1)
    return out, p


def marginal_probabilities(state: StateVector, targets: Sequence[int]) -> np.ndarray:
    n = state.num_qubits
    targets = _check_targets(targets, n)
    probs = np.moveaxis(state.probabilities().reshape((2,) * n), targets, list(range(len(targets))))
    return probs.reshape(2 ** len(targets), -1).sum(axis=1)


def measure_computational(state: StateVector, targets: Sequence[int], rng: np.random.Generator) -> MeasurementRecord:
    """Born-rule measurement of ``targets``; outcome is the big-endian integer label."""
    n = state.num_qubits
    targets = _check_targets(targets, n)
    probs = marginal_probabilities(state, targets)
    outcome = int(rng.choice(probs.size, p=probs / probs.sum()))
    post, p = _collapse(state.amplitudes, n, targets, outcome)
    return MeasurementRecord(outcome, StateVector(n, post / np.sqrt(p)), p)


def xy_basis(angle: int) -> np.ndarray:
    """Rows are <+_angle| and <-_angle|."""
    ph = np.exp(1j * np.pi * (angle % 8) / 4)
    return np.array([[1, ph], [1, -ph]]).conj() * _S2


def measure_xy(state: StateVector, target: int, angle: int, rng: np.random.Generator) -> MeasurementRecord:
    """Measure in {|+_angle>, |-_angle>}; outcome 0 is the + projection."""
    n = state.num_qubits
    (target,) = _check_targets([target], n)
    basis = xy_basis(angle)
    rotated = apply_matrix(state.amplitudes, n, basis, [target])
    probs = marginal_probabilities(StateVector(n, rotated / np.linalg.norm(rotated)), [target])
    outcome = int(rng.random() >= probs[0])
    post, p = _collapse(rotated, n, [target], outcome)
    post = apply_matrix(post, n, basis.conj().T, [target])
    return MeasurementRecord(outcome, StateVector(n, post / np.sqrt(p)), float(probs[outcome]))


def measure_xy_discard(vec: np.ndarray, n: int, target: int, angle: int, u: float, force: int | None = None):
    """Measure one qubit of a raw vector in the XY plane and remove it.

    ``u`` is a uniform variate in [0, 1). Returns (outcome, probability,
    remaining normalized vector on n-1 qubits).
    """
    psi = np.moveaxis(vec.reshape((2,) * n), target, 0).reshape(2, -1)
    branches = xy_basis(angle) @ psi
    p0 = float(np.vdot(branches[0], branches[0]).real)
    outcome = int(u >= p0) if force is None else force
    if force is None and p0 > 1 - TOL:
        outcome = 0  # guards u rounding onto a zero-probability branch
    rest = branches[outcome]
    p = p0 if outcome == 0 else 1.0 - p0
    norm = np.linalg.norm(rest)
    return outcome, p, rest / norm if norm > 0 else rest


def _observable_matrix(observable) -> np.ndarray:
    if hasattr(observable, "to_matrix"):
        return observable.to_matrix()
    if isinstance(observable, str):
        return gate_matrix(observable)
    return np.asarray(observable, dtype=complex)


def measure_observable(state: StateVector, observable, targets: Sequence[int], rng: np.random.Generator) -> MeasurementRecord:
    """Projective measurement of a hermitian observable; outcome is its eigenvalue.

    Pauli-type observables report integer outcomes +1 / -1.
    """
    n = state.num_qubits
    targets = _check_targets(targets, n)
    obs = _observable_matrix(observable)
    if obs.shape != (2 ** len(targets),) * 2:
        raise ValueError("observable arity does not match targets")
    if np.max(np.abs(obs - obs.conj().T)) > TOL:
        raise ValueError("observable is not hermitian")
    evals, evecs = np.linalg.eigh(obs)
    rounded = np.round(evals / EIG_TOL) * EIG_TOL
    labels = np.unique(rounded)
    psi = np.moveaxis(state.tensor(), targets, list(range(len(targets)))).reshape(2 ** len(targets), -1)
    projected = []
    for lab in labels:
        v = evecs[:, np.isclose(rounded, lab)]
        projected.append(v @ (v.conj().T @ psi))
    probs = np.array([np.vdot(b, b).real for b in projected])
    idx = int(rng.choice(len(labels), p=probs / probs.sum()))
    branch = projected[idx].reshape((2,) * n)
    post = np.moveaxis(branch, list(range(len(targets))), targets).reshape(-1)
    value = float(labels[idx])
    outcome = int(round(value)) if abs(value - round(value)) < EIG_TOL else value
    return MeasurementRecord(outcome, StateVector(n, post / np.sqrt(probs[idx])), float(probs[idx]))


def expectation(state, observable, targets: Sequence[int] | None = None) -> float:
    n = state.num_qubits
    obs = _observable_matrix(observable)
    targets = list(range(n)) if targets is None else _check_targets(targets, n)
    if isinstance(state, DensityMatrix):
        out = apply_matrix(state.matrix.reshape(-1), 2 * n, obs, targets)
        return float(np.trace(out.reshape(2**n, 2**n)).real)
    out = apply_matrix(state.amplitudes, n, obs, targets)
    return float(np.vdot(state.amplitudes, out).real)


def partial_trace(rho: DensityMatrix, keep: Sequence[int]) -> DensityMatrix:
    """Reduced state on ``keep`` (returned in increasing qubit order)."""
    n = rho.num_qubits
    keep = sorted(_check_targets(keep, n))
    if not keep:
        raise ValueError("keep set is empty; the result would be a scalar trace")
    drop = [q for q in range(n) if q not in keep]
    t = rho.matrix.reshape((2,) * (2 * n))
    letters = [chr(ord("a") + i) for i in range(2 * n)]
    for q in drop:
        letters[n + q] = letters[q]
    out = [letters[q] for q in keep] + [letters[n + q] for q in keep]
    red = np.einsum("".join(letters) + "->" + "".join(out), t)
    dim = 2 ** len(keep)
    return DensityMatrix(len(keep), red.reshape(dim, dim))


def _as_matrix(x) -> np.ndarray:
    if isinstance(x, DensityMatrix):
        return x.matrix
    if isinstance(x, StateVector):
        return np.outer(x.amplitudes, x.amplitudes.conj())
    return np.asarray(x, dtype=complex)


def trace_distance(a, b) -> float:
    """(1/2) sum |eig(a - b)|."""
    ma, mb = _as_matrix(a), _as_matrix(b)
    if ma.shape != mb.shape:
        raise ValueError("dimension mismatch")
    if ma.tobytes() > mb.tobytes():
        ma, mb = mb, ma  # bit-exact symmetry
    diff = ma - mb
    return float(0.5 * np.abs(np.linalg.eigvalsh((diff + diff.conj().T) / 2)).sum())


def fidelity(a: StateVector, b: StateVector) -> float:
    """Phase-invariant overlap |<a|b>|^2 of pure states."""
    if a.num_qubits != b.num_qubits:
        raise ValueError("dimension mismatch")
    return float(abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)


def one_time_pad_average(rho: DensityMatrix) -> np.ndarray:
    """Average of X^a Z^b rho Z^b X^a over all 4^n pads."""
    n = rho.num_qubits
    acc = np.zeros_like(rho.matrix)
    for a in range(2**n):
        for b in range(2**n):
            pad = np.ones((1, 1), dtype=complex)
            for q in range(n):
                xa = (a >> (n - 1 - q)) & 1
                zb = (b >> (n - 1 - q)) & 1
                pad = np.kron(pad, np.linalg.matrix_power(GATES["X"], xa) @ np.linalg.matrix_power(GATES["Z"], zb))
            acc += pad @ rho.matrix @ pad.conj().T
    return acc / 4**n
