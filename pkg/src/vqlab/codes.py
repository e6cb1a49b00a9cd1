"""Stabilizer tables, the 3-qubit flip code and the signed polynomial qudit code."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import qsim
from .pauli import PauliOperator, QuditPauli, _qudit_digits, commutes
from .qsim import QuditRegister, StateVector

# stabilizer codes


@dataclass(frozen=True)
class StabilizerCode:
    name: str
    num_physical: int
    generators: tuple

    def __post_init__(self):
        for g in self.generators:
            if g.num_qubits != self.num_physical:
                raise ValueError("generator size mismatch")
            if not (g * g).is_identity():
                raise ValueError(f"{g} does not square to +I")
        for a, b in itertools.combinations(self.generators, 2):
            if not commutes(a, b):
                raise ValueError(f"generators {a} and {b} anticommute")

    def logical_zero(self) -> StateVector:
        """Project |0...0> onto the code space and normalize."""
        n = self.num_physical
        vec = qsim.zero_state(n).amplitudes.copy()
        for g in self.generators:
            vec = (vec + g.to_matrix() @ vec) / 2
        norm = np.linalg.norm(vec)
        if norm < 1e-9:
            raise ValueError("|0...0> has no overlap with the code space")
        return StateVector(n, vec / norm)

    def projector(self) -> np.ndarray:
        dim = 2**self.num_physical
        proj = np.eye(dim, dtype=complex)
        for g in self.generators:
            proj = proj @ (np.eye(dim) + g.to_matrix()) / 2
        return proj

    def random_codeword(self, rng: np.random.Generator) -> StateVector:
        proj = self.projector()
        v = proj @ (rng.normal(size=proj.shape[0]) + 1j * rng.normal(size=proj.shape[0]))
        return StateVector.from_amplitudes(v)


def _code(name: str, labels: Sequence[str]) -> StabilizerCode:
    gens = tuple(PauliOperator.from_label(s) for s in labels)
    return StabilizerCode(name, gens[0].num_qubits, gens)


FIVE_QUBIT_LABELS = ("IXZZX", "XIXZZ", "ZXIXZ", "ZZXIX")
FIVE_QUBIT = _code("five-qubit", FIVE_QUBIT_LABELS)

# g5 printed as IXXIIXZ in one table anticommutes with IIIZZZZ; the Z-type
# generators mirror the X-type ones, so g5 is IZZIIZZ.
STEANE_PRINTED_G5 = "IXXIIXZ"
STEANE_LABELS = ("IIIXXXX", "IXXIIXX", "XIXIXIX", "IIIZZZZ", "IZZIIZZ", "ZIZIZIZ")
STEANE = _code("steane", STEANE_LABELS)

_SQ = 1 / np.sqrt(2)
X_ROT = (qsim.GATES["X"] + qsim.GATES["Z"]) * _SQ
Z_ROT = (qsim.GATES["X"] - qsim.GATES["Z"]) * _SQ


def rotated_generators() -> list[np.ndarray]:
    """g'_i: five-qubit generators with the fifth factor X -> X', Z -> Z'."""
    out = []
    for label in FIVE_QUBIT_LABELS:
        head = PauliOperator.from_label(label[:4]).to_matrix()
        tail = X_ROT if label[4] == "X" else Z_ROT
        out.append(np.kron(head, tail))
    return out


def rotated_generator_sum(state) -> float:
    """Sum over the four rotated generators of their expectation values."""
    if state.num_qubits != 5:
        raise ValueError("rotated generator sum needs a 5-qubit state")
    return float(sum(qsim.expectation(state, g) for g in rotated_generators()))


def codespace_check(code: StabilizerCode, state: StateVector, tol: float = 1e-9) -> bool:
    if state.num_qubits != code.num_physical:
        raise ValueError("size mismatch")
    return all(abs(qsim.expectation(state, g) - 1) < tol for g in code.generators)


# 3-qubit flip code


def flip3_encode(logical: StateVector) -> StateVector:
    a, b = logical.amplitudes
    amps = np.zeros(8, dtype=complex)
    amps[0], amps[7] = a, b
    return StateVector(3, amps)


_FLIP_SYNDROMES = {(1, 1): None, (-1, 1): 0, (-1, -1): 1, (1, -1): 2}


def flip3_cycle(logical: StateVector, error: int | None, rng: np.random.Generator):
    """Encode, apply X on ``error`` (1-based, or None), measure syndromes, correct.

    Returns ((Z1Z2, Z2Z3), corrected 3-qubit state).
    """
    if error not in (None, 1, 2, 3):
        raise ValueError("error position must be None, 1, 2 or 3")
    state = flip3_encode(logical)
    if error is not None:
        state = qsim.apply_unitary(state, "X", [error - 1])
    zz = np.kron(qsim.GATES["Z"], qsim.GATES["Z"])
    r1 = qsim.measure_observable(state, zz, [0, 1], rng)
    r2 = qsim.measure_observable(r1.post_state, zz, [1, 2], rng)
    syndrome = (r1.outcome, r2.outcome)
    corrected = r2.post_state
    flip = _FLIP_SYNDROMES[syndrome]
    if flip is not None:
        corrected = qsim.apply_unitary(corrected, "X", [flip])
    return syndrome, corrected


# signed polynomial code

VALUE_AT_ZERO = "value-at-zero"  # p(0) = i encodes logical i
ROOT_AT_LOGICAL = "root-at-logical"  # p(i) = 0, kept only to show it is not a code


@dataclass(frozen=True)
class SignedPolynomialCode:
    q: int
    d: int
    eval_points: tuple = ()
    sign_key: tuple = ()
    convention: str = VALUE_AT_ZERO
    t: int = field(init=False)

    def __post_init__(self):
        t = 2 * self.d + 1
        object.__setattr__(self, "t", t)
        pts = self.eval_points or tuple(range(1, t + 1))
        key = self.sign_key or (1,) * t
        object.__setattr__(self, "eval_points", tuple(int(a) % self.q for a in pts))
        object.__setattr__(self, "sign_key", tuple(int(k) for k in key))
        if self.q < 3 or any(self.q % p == 0 for p in range(2, int(self.q**0.5) + 1)):
            raise ValueError("q must be prime")
        if self.q <= t:
            raise ValueError("need q > t")
        if len(self.eval_points) != t or len(set(self.eval_points)) != t or 0 in self.eval_points:
            raise ValueError("evaluation points must be t distinct nonzero field elements")
        if len(self.sign_key) != t or any(k not in (1, -1) for k in self.sign_key):
            raise ValueError("sign key must be a +-1 vector of length t")
        if self.q**self.d > 125:
            raise ValueError("q^d above enumeration cap 125")
        if self.convention not in (VALUE_AT_ZERO, ROOT_AT_LOGICAL):
            raise ValueError(f"unknown convention {self.convention!r}")

    def with_key(self, key: Sequence[int]) -> "SignedPolynomialCode":
        return SignedPolynomialCode(self.q, self.d, self.eval_points, tuple(key), self.convention)

    def polynomials(self, i: int):
        """Coefficient tuples (c_0..c_d) of admissible polynomials for logical i."""
        q, d = self.q, self.d
        for tail in itertools.product(range(q), repeat=d):
            if self.convention == VALUE_AT_ZERO:
                yield (i % q,) + tail
            else:
                # p(i) = 0 fixes c_0 = -(sum c_j i^j)
                c0 = -sum(c * pow(i, j + 1, q) for j, c in enumerate(tail)) % q
                yield (c0,) + tail

    def evaluate(self, coeffs: Sequence[int]) -> tuple:
        q = self.q
        vals = []
        for k, a in zip(self.sign_key, self.eval_points):
            v = sum(c * pow(a, j, q) for j, c in enumerate(coeffs)) % q
            vals.append((k * v) % q)
        return tuple(vals)

    def index(self, digits: Sequence[int]) -> int:
        out = 0
        for v in digits:
            out = out * self.q + v
        return out


def signed_poly_encode(code: SignedPolynomialCode, i: int) -> QuditRegister:
    if not 0 <= i < code.q:
        raise ValueError("logical value must be in F_q")
    amps = np.zeros(code.q**code.t, dtype=complex)
    for coeffs in code.polynomials(i):
        amps[code.index(code.evaluate(coeffs))] += 1
    return QuditRegister(code.q, code.t, amps / np.linalg.norm(amps))


def _interpolate(q: int, xs: Sequence[int], ys: Sequence[int]) -> list[int]:
    """Coefficients of the unique degree < len(xs) polynomial through the points."""
    m = len(xs)
    vand = [[pow(x, j, q) for j in range(m)] + [y % q] for x, y in zip(xs, ys)]
    for col in range(m):
        piv = next(r for r in range(col, m) if vand[r][col] % q)
        vand[col], vand[piv] = vand[piv], vand[col]
        inv = pow(vand[col][col], q - 2, q)
        vand[col] = [(v * inv) % q for v in vand[col]]
        for r in range(m):
            if r != col and vand[r][col]:
                f = vand[r][col]
                vand[r] = [(a - f * b) % q for a, b in zip(vand[r], vand[col])]
    return [vand[r][m] for r in range(m)]


class SignedPolynomialEncoder:
    """Unitary E_k = D_k (I x F^{(x)d} x I^{(x)d}) with E_k|i>|0...0> = codeword of i.

    D_k permutes basis states: the input (i, v_2..v_{d+1}, w_{d+2}..w_t) fixes the
    polynomial p with p(0) = i and k_j p(alpha_j) = v_j, and maps to
    (k_1 p(alpha_1), v_2..v_{d+1}, k_j p(alpha_j) + w_j).
    """

    def __init__(self, code: SignedPolynomialCode):
        if code.convention != VALUE_AT_ZERO:
            raise ValueError("the encoding unitary exists only for the value-at-zero convention")
        self.code = code
        q, d, t = code.q, code.d, code.t
        digits = _qudit_digits(q, t)
        perm = np.empty(q**t, dtype=np.int64)
        alphas, keys = code.eval_points, code.sign_key
        for idx, dig in enumerate(digits):
            i = int(dig[0])
            xs = [0] + list(alphas[1 : d + 1])
            ys = [i] + [int(dig[j]) * keys[j] % q for j in range(1, d + 1)]  # k_j^{-1} = k_j
            coeffs = _interpolate(q, xs, ys)
            vals = code.evaluate(coeffs)
            out = [vals[0]] + [int(dig[j]) for j in range(1, d + 1)]
            out += [(vals[j] + int(dig[j])) % q for j in range(d + 1, t)]
            perm[idx] = code.index(out)
        self.perm = perm
        self.inv_perm = np.argsort(perm)
        f = np.exp(2j * np.pi * np.outer(np.arange(q), np.arange(q)) / q) / np.sqrt(q)
        self._fourier = f

    def _fourier_on(self, amps: np.ndarray, inverse: bool) -> np.ndarray:
        q, d, t = self.code.q, self.code.d, self.code.t
        f = self._fourier.conj().T if inverse else self._fourier
        shape = amps.shape[:-1]
        psi = amps.reshape(shape + (q,) * t)
        off = len(shape)
        for j in range(1, d + 1):
            psi = np.moveaxis(np.tensordot(psi, f, axes=([off + j], [1])), -1, off + j)
        return psi.reshape(amps.shape)

    def encode(self, amps: np.ndarray) -> np.ndarray:
        """Apply E_k to amplitudes (trailing axis of length q^t)."""
        psi = self._fourier_on(amps, inverse=False)
        out = np.empty_like(psi)
        out[..., self.perm] = psi
        return out

    def decode(self, amps: np.ndarray) -> np.ndarray:
        """Apply E_k^dag."""
        psi = np.empty_like(amps)
        psi[..., self.inv_perm] = amps
        return self._fourier_on(psi, inverse=True)


def _pad_tables(q: int, t: int, xs: np.ndarray, zs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Destination indices and phases of X^a Z^b for each pad row."""
    digits = _qudit_digits(q, t)
    roots = np.exp(2j * np.pi * np.arange(q) / q)
    weights = q ** np.arange(t - 1, -1, -1)
    phase = roots[(zs @ digits.T) % q]
    dest = ((digits[None, :, :] + xs[:, None, :]) % q) @ weights
    return dest, phase


def _pad_stack(amps: np.ndarray, q: int, t: int, xs: np.ndarray, zs: np.ndarray, inverse: bool,
               tables: tuple | None = None) -> np.ndarray:
    """Apply X^a Z^b (or its inverse) row-wise: amps has shape (P, q^t)."""
    dest, phase = tables if tables is not None else _pad_tables(q, t, xs, zs)
    rows = np.arange(amps.shape[0])[:, None]
    if not inverse:
        out = np.empty_like(amps)
        out[rows, dest] = amps * phase
        return out
    return amps[rows, dest] * phase.conj()


def signed_poly_auth_experiment(
    code: SignedPolynomialCode,
    attack,
    trials: int | None = None,
    rng: np.random.Generator | None = None,
    logical=None,
    support: Sequence[int] | None = None,
) -> float:
    """Accept-and-incorrect probability of encode -> pad -> attack -> unpad -> decode -> flag check.

    ``attack`` is a ``QuditPauli`` or a q^t x q^t unitary. ``logical`` is a
    length-q amplitude vector for the data qudit (default |0>). When q^t <= 125
    and ``trials`` is None the average over all 2^t sign keys and all pads is
    exact; otherwise ``trials`` (key, pad) pairs are sampled.

    Pad factors on qudits the attack does not touch cancel against the unpad,
    so the exhaustive sum only runs over pads on ``support`` (the attack's
    support for a ``QuditPauli``, every qudit for a matrix unless given).
    """
    q, t = code.q, code.t
    psi = np.zeros(q, dtype=complex)
    psi[0] = 1
    if logical is not None:
        psi = np.asarray(logical, dtype=complex)
        psi = psi / np.linalg.norm(psi)
    if isinstance(attack, QuditPauli):
        if attack.q != q or attack.num_qudits != t:
            raise ValueError("attack does not match code size")
        apply_attack = attack.apply
        if support is None:
            support = [j for j in range(t) if attack.x_powers[j] % q or attack.z_powers[j] % q]
    else:
        mat = np.asarray(attack, dtype=complex)
        if mat.shape != (q**t, q**t):
            raise ValueError("attack matrix does not match code size")
        apply_attack = lambda a: a @ mat.T  # noqa: E731
    data_in = np.zeros(q**t, dtype=complex)
    data_in[:: q ** (t - 1)][:q] = psi  # |psi>|0...0>
    exhaustive = trials is None
    if exhaustive and q**t > 125:
        raise ValueError("exhaustive averaging capped at q^t <= 125")
    if not exhaustive and rng is None:
        raise ValueError("sampling needs an rng")

    if exhaustive:
        keys = list(itertools.product((1, -1), repeat=t))
        support = list(range(t)) if support is None else sorted(set(support))
        local = np.array(list(itertools.product(range(q), repeat=len(support))), dtype=np.int64)
        pads = np.zeros((len(local), t), dtype=np.int64)
        pads[:, support] = local.reshape(len(local), len(support))
        xs = np.repeat(pads, len(pads), axis=0)
        zs = np.tile(pads, (len(pads), 1))
        shared = _pad_tables(q, t, xs, zs)
        batches = [(k, xs, zs) for k in keys]
    else:
        batches = []
        for _ in range(trials):
            k = tuple(rng.choice((1, -1), size=t))
            batches.append((k, rng.integers(0, q, size=(1, t)), rng.integers(0, q, size=(1, t))))
    total, count = 0.0, 0
    encoders: dict = {}
    if not exhaustive:
        shared = None
    for key, xs, zs in batches:
        enc = encoders.get(key)
        if enc is None:
            enc = encoders[key] = SignedPolynomialEncoder(code.with_key(key))
        stack = np.broadcast_to(enc.encode(data_in), (len(xs), q**t)).copy()
        tables = shared if shared is not None else _pad_tables(q, t, xs, zs)
        stack = _pad_stack(stack, q, t, xs, zs, inverse=False, tables=tables)
        stack = apply_attack(stack)
        stack = _pad_stack(stack, q, t, xs, zs, inverse=True, tables=tables)
        stack = enc.decode(stack)
        # accept: flags all zero; incorrect: data orthogonal to psi
        accepted = stack[:, :: q ** (t - 1)][:, :q]
        overlap = accepted @ psi.conj()
        bad = np.sum(np.abs(accepted) ** 2, axis=1) - np.abs(overlap) ** 2
        total += float(bad.sum())
        count += len(xs)
    return total / count
