"""Phased Pauli algebra, Clifford tableaux and twirls.

A ``PauliOperator`` is ``i^phase * prod_q X_q^{x_q} Z_q^{z_q}`` where bit ``q`` of
each mask refers to qubit ``q`` (qubit 0 is the leftmost tensor factor, as in
``qsim``). Under this convention Y = i X Z, so ``from_label("Y")`` carries
phase exponent 1.

Global phases of Cliffords are quotiented out: a ``CliffordElement`` stores
only the images of the generators, which determine the unitary up to phase.
Pauli phases are tracked exactly everywhere else.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .qsim import GATES, DensityMatrix

_PHASES = (1, 1j, -1, -1j)


def _popcount(v: int) -> int:
    return bin(v).count("1")


@dataclass(frozen=True)
class PauliOperator:
    num_qubits: int
    x_mask: int
    z_mask: int
    phase: int = 0  # exponent k of i^k

    def __post_init__(self):
        full = (1 << self.num_qubits) - 1
        if self.x_mask & ~full or self.z_mask & ~full:
            raise ValueError("mask wider than num_qubits")
        object.__setattr__(self, "phase", self.phase % 4)

    @classmethod
    def identity(cls, n: int) -> "PauliOperator":
        return cls(n, 0, 0, 0)

    @classmethod
    def from_label(cls, label: str) -> "PauliOperator":
        """Parse e.g. ``"XIZ"``, ``"-YZ"``, ``"iX"``. Letters map to hermitian Paulis."""
        k = 0
        body = label
        for prefix, exp in (("-i", 2 + 1), ("+i", 1), ("-", 2), ("+", 0), ("i", 1)):
            if body.startswith(prefix):
                k = exp
                body = body[len(prefix):]
                break
        x = z = 0
        for q, ch in enumerate(body):
            if ch == "X":
                x |= 1 << q
            elif ch == "Z":
                z |= 1 << q
            elif ch == "Y":
                x |= 1 << q
                z |= 1 << q
                k += 1
            elif ch != "I":
                raise ValueError(f"bad Pauli letter {ch!r}")
        return cls(len(body), x, z, k)

    @classmethod
    def single(cls, n: int, letter: str, qubit: int) -> "PauliOperator":
        label = ["I"] * n
        label[qubit] = letter
        return cls.from_label("".join(label))

    @property
    def weight(self) -> int:
        return _popcount(self.x_mask | self.z_mask)

    @property
    def phase_value(self) -> complex:
        return _PHASES[self.phase]

    def is_identity(self) -> bool:
        return self.x_mask == 0 and self.z_mask == 0 and self.phase == 0

    def is_hermitian(self) -> bool:
        return (self.phase - _popcount(self.x_mask & self.z_mask)) % 2 == 0

    def letters(self) -> str:
        out = []
        for q in range(self.num_qubits):
            xb, zb = (self.x_mask >> q) & 1, (self.z_mask >> q) & 1
            out.append("IXZY"[xb + 2 * zb])
        return "".join(out)

    def sign(self) -> complex:
        """Coefficient c with self = c * (tensor of hermitian letters)."""
        return _PHASES[(self.phase - _popcount(self.x_mask & self.z_mask)) % 4]

    def label(self) -> str:
        c = self.sign()
        prefix = {1: "+", -1: "-", 1j: "+i", -1j: "-i"}[c]
        return prefix + self.letters()

    def unsigned(self) -> "PauliOperator":
        """Hermitian representative with sign +1."""
        return PauliOperator(self.num_qubits, self.x_mask, self.z_mask, _popcount(self.x_mask & self.z_mask))

    def to_matrix(self) -> np.ndarray:
        return _PHASES[self.phase] * _xz_matrix(self.num_qubits, self.x_mask, self.z_mask)

    def __mul__(self, other: "PauliOperator") -> "PauliOperator":
        return pauli_multiply(self, other)

    def __str__(self) -> str:
        return self.label()


@functools.lru_cache(maxsize=8192)
def _xz_matrix(n: int, x: int, z: int) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    X, Z = GATES["X"], GATES["Z"]
    for q in range(n):
        f = np.eye(2, dtype=complex)
        if (x >> q) & 1:
            f = f @ X
        if (z >> q) & 1:
            f = f @ Z
        out = np.kron(out, f)
    out.setflags(write=False)
    return out


def pauli_multiply(a: PauliOperator, b: PauliOperator) -> PauliOperator:
    if a.num_qubits != b.num_qubits:
        raise ValueError("size mismatch")
    k = a.phase + b.phase + 2 * _popcount(a.z_mask & b.x_mask)
    return PauliOperator(a.num_qubits, a.x_mask ^ b.x_mask, a.z_mask ^ b.z_mask, k)


def commutes(a: PauliOperator, b: PauliOperator) -> bool:
    return (_popcount(a.x_mask & b.z_mask) + _popcount(a.z_mask & b.x_mask)) % 2 == 0


def all_paulis(n: int, include_identity: bool = True) -> Iterator[PauliOperator]:
    """Hermitian sign-+1 representatives of the 4^n Pauli classes."""
    for x in range(1 << n):
        for z in range(1 << n):
            if x == 0 and z == 0 and not include_identity:
                continue
            yield PauliOperator(n, x, z, _popcount(x & z))


def pauli_decompose(matrix: np.ndarray) -> dict[str, complex]:
    """Coefficients c_P with matrix = sum c_P P over hermitian letter strings."""
    dim = matrix.shape[0]
    n = int(round(np.log2(dim)))
    out = {}
    for p in all_paulis(n):
        c = np.trace(p.to_matrix().conj().T @ matrix) / dim
        if abs(c) > 1e-14:
            out[p.letters()] = complex(c)
    return out


# Cliffords


@dataclass(frozen=True)
class CliffordElement:
    """Generator-image tableau: ``x_images[i] = C X_i C^dag``, likewise for Z."""

    num_qubits: int
    x_images: tuple
    z_images: tuple

    def __post_init__(self):
        n = self.num_qubits
        imgs = list(self.x_images) + list(self.z_images)
        if len(self.x_images) != n or len(self.z_images) != n:
            raise ValueError("need one X and one Z image per qubit")
        for p in imgs:
            if p.num_qubits != n or not p.is_hermitian() or p.x_mask == p.z_mask == 0:
                raise ValueError("images must be hermitian non-identity Paulis")
        for i in range(n):
            for j in range(n):
                if not commutes(self.x_images[i], self.x_images[j]) or not commutes(
                    self.z_images[i], self.z_images[j]
                ):
                    raise ValueError("symplectic condition violated")
                if commutes(self.x_images[i], self.z_images[j]) != (i != j):
                    raise ValueError("symplectic condition violated")

    @classmethod
    def identity(cls, n: int) -> "CliffordElement":
        return cls(
            n,
            tuple(PauliOperator(n, 1 << i, 0) for i in range(n)),
            tuple(PauliOperator(n, 0, 1 << i) for i in range(n)),
        )

    @classmethod
    def from_matrix(cls, u: np.ndarray) -> "CliffordElement":
        n = int(round(np.log2(u.shape[0])))
        xs, zs = [], []
        for i in range(n):
            for gen, acc in ((PauliOperator(n, 1 << i, 0), xs), (PauliOperator(n, 0, 1 << i), zs)):
                acc.append(_as_pauli(u @ gen.to_matrix() @ u.conj().T))
        return cls(n, tuple(xs), tuple(zs))

    @classmethod
    def from_gate(cls, name: str, targets: Sequence[int], n: int) -> "CliffordElement":
        """Clifford of a named gate (H, S, SDG, X, Y, Z, CNOT, CZ, SWAP) embedded in n qubits."""
        base = _gate_clifford(name.upper())
        k = base.num_qubits
        if len(targets) != k:
            raise ValueError(f"{name} acts on {k} qubits")
        emb = lambda p: _embed(p, targets, n)  # noqa: E731
        xs = list(PauliOperator(n, 1 << i, 0) for i in range(n))
        zs = list(PauliOperator(n, 0, 1 << i) for i in range(n))
        for j, t in enumerate(targets):
            xs[t] = emb(base.x_images[j])
            zs[t] = emb(base.z_images[j])
        return cls(n, tuple(xs), tuple(zs))

    def key(self) -> tuple:
        return tuple((p.x_mask, p.z_mask, p.phase) for p in self.x_images + self.z_images)

    def to_matrix(self) -> np.ndarray:
        """Dense unitary (fixed up to global phase)."""
        n = self.num_qubits
        dim = 2**n
        proj = np.eye(dim, dtype=complex)
        for g in self.z_images:
            proj = proj @ (np.eye(dim) + g.to_matrix()) / 2
        col = int(np.argmax(np.linalg.norm(proj, axis=0)))
        s0 = proj[:, col] / np.linalg.norm(proj[:, col])
        u = np.zeros((dim, dim), dtype=complex)
        xmats = [g.to_matrix() for g in self.x_images]
        for idx in range(dim):
            v = s0
            for q in range(n):
                if (idx >> (n - 1 - q)) & 1:
                    v = xmats[q] @ v
            u[:, idx] = v
        return u

    def inverse(self) -> "CliffordElement":
        return CliffordElement.from_matrix(self.to_matrix().conj().T)


def _embed(p: PauliOperator, targets: Sequence[int], n: int) -> PauliOperator:
    x = z = 0
    for j, t in enumerate(targets):
        x |= ((p.x_mask >> j) & 1) << t
        z |= ((p.z_mask >> j) & 1) << t
    return PauliOperator(n, x, z, p.phase)


def _as_pauli(m: np.ndarray) -> PauliOperator:
    """Identify a matrix that is a phased Pauli (raises otherwise)."""
    dim = m.shape[0]
    n = int(round(np.log2(dim)))
    for p in all_paulis(n):
        base = _xz_matrix(n, p.x_mask, p.z_mask)
        c = np.trace(base.conj().T @ m) / dim
        if abs(abs(c) - 1) < 1e-9:
            for k, ph in enumerate(_PHASES):
                if abs(c - ph) < 1e-9:
                    return PauliOperator(n, p.x_mask, p.z_mask, k)
    raise ValueError("matrix is not a phased Pauli")


@functools.lru_cache(maxsize=None)
def _gate_clifford(name: str) -> CliffordElement:
    if name not in GATES or name in ("T", "TDG", "CCNOT", "TOFFOLI"):
        raise ValueError(f"{name} is not a supported Clifford gate")
    return CliffordElement.from_matrix(GATES[name])


def conjugate(c: CliffordElement, p: PauliOperator) -> PauliOperator:
    """C p C^dag computed on the tableau."""
    if c.num_qubits != p.num_qubits:
        raise ValueError("size mismatch")
    out = PauliOperator(p.num_qubits, 0, 0, p.phase)
    for q in range(p.num_qubits):
        if (p.x_mask >> q) & 1:
            out = pauli_multiply(out, c.x_images[q])
    for q in range(p.num_qubits):
        if (p.z_mask >> q) & 1:
            out = pauli_multiply(out, c.z_images[q])
    return out


def compose(a: CliffordElement, b: CliffordElement) -> CliffordElement:
    """Tableau of the product a*b (b acts first)."""
    return CliffordElement(
        a.num_qubits,
        tuple(conjugate(a, p) for p in b.x_images),
        tuple(conjugate(a, p) for p in b.z_images),
    )


# symplectic vectors are (x, z) int pairs


def _symp(a: tuple[int, int], b: tuple[int, int]) -> int:
    return (_popcount(a[0] & b[1]) + _popcount(a[1] & b[0])) & 1


def _hermitian(n: int, v: tuple[int, int], sign_bit: int) -> PauliOperator:
    return PauliOperator(n, v[0], v[1], _popcount(v[0] & v[1]) + 2 * sign_bit)


def _complement_vectors(n: int, chosen: list[tuple[int, int]]) -> Iterator[tuple[int, int]]:
    """All vectors symplectically orthogonal to every chosen vector."""
    for x in range(1 << n):
        for z in range(1 << n):
            v = (x, z)
            if all(_symp(v, c) == 0 for c in chosen):
                yield v


def _enumerate_symplectic(n: int) -> Iterator[list[tuple[int, int]]]:
    def rec(i, images):
        if i == n:
            yield list(images)
            return
        for xv in _complement_vectors(n, images):
            if xv == (0, 0):
                continue
            for zv in _complement_vectors(n, images):
                if _symp(xv, zv) == 1:
                    yield from rec(i + 1, images + [xv, zv])

    yield from rec(0, [])


@functools.lru_cache(maxsize=None)
def _clifford_table(n: int) -> tuple:
    out = []
    for images in _enumerate_symplectic(n):
        for signs in range(1 << (2 * n)):
            bits = [(signs >> j) & 1 for j in range(2 * n)]
            ps = [_hermitian(n, v, s) for v, s in zip(images, bits)]
            out.append(CliffordElement(n, tuple(ps[0::2]), tuple(ps[1::2])))
    return tuple(out)


@functools.lru_cache(maxsize=None)
def _conjugation_table(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """x, z, phase of C P C^dag for every Clifford C and unsigned Pauli P = (x << n) | z."""
    elements = _clifford_table(n)
    size = 4**n
    xs = np.empty((len(elements), size), dtype=np.int64)
    zs = np.empty_like(xs)
    ph = np.empty_like(xs)
    for i, c in enumerate(elements):
        for k in range(size):
            img = conjugate(c, PauliOperator(n, k >> n, k & ((1 << n) - 1), 0))
            xs[i, k], zs[i, k], ph[i, k] = img.x_mask, img.z_mask, img.phase
    for a in (xs, zs, ph):
        a.setflags(write=False)
    return xs, zs, ph


def enumerate_cliffords(n: int) -> list[CliffordElement]:
    """Every n-qubit Clifford modulo global phase (24 for n=1, 11520 for n=2)."""
    if n not in (1, 2):
        raise ValueError("enumeration supported for n = 1 or 2 only")
    return list(_clifford_table(n))


def _project_out(v: tuple[int, int], pairs: list[tuple[tuple[int, int], tuple[int, int]]]):
    x, z = v
    for a, b in pairs:
        # v -> v + <v,b> a + <v,a> b keeps v orthogonal to span{a, b}
        cb, ca = _symp((x, z), b), _symp((x, z), a)
        if cb:
            x, z = x ^ a[0], z ^ a[1]
        if ca:
            x, z = x ^ b[0], z ^ b[1]
    return x, z


def random_clifford(n: int, rng: np.random.Generator) -> CliffordElement:
    """Uniformly random n-qubit Clifford modulo phase.

    Builds a uniformly random symplectic basis pair by pair (each new vector
    uniform in the symplectic complement of the previous pairs), then draws
    independent uniform sign bits for the 2n images.
    """
    if n < 1 or n > 6:
        raise ValueError("random_clifford supports 1 <= n <= 6")
    pairs: list = []
    span = [((1 << q), 0) for q in range(n)] + [(0, (1 << q)) for q in range(n)]

    def draw():
        basis = [_project_out(v, pairs) for v in span]
        bits = rng.integers(0, 2, size=len(basis))
        x = z = 0
        for b, v in zip(bits, basis):
            if b:
                x, z = x ^ v[0], z ^ v[1]
        return x, z

    for _ in range(n):
        xv = draw()
        while xv == (0, 0):
            xv = draw()
        zv = draw()
        while _symp(xv, zv) == 0:
            zv = draw()
        pairs.append((xv, zv))
    signs = rng.integers(0, 2, size=2 * n)
    xs = tuple(_hermitian(n, p[0], int(s)) for p, s in zip(pairs, signs[:n]))
    zs = tuple(_hermitian(n, p[1], int(s)) for p, s in zip(pairs, signs[n:]))
    return CliffordElement(n, xs, zs)


def twirl_average(rho, p1: PauliOperator, p2: PauliOperator, group: str = "clifford") -> np.ndarray:
    """(1/|G|) sum_g g^dag p1 g rho g^dag p2 g, exactly.

    ``group`` is ``"clifford"`` (n <= 2, full enumeration) or ``"pauli"``
    (n <= 3). Since G is closed under inverses the sum is evaluated as
    sum_g (g p1 g^dag) rho (g p2 g^dag); conjugated pairs are bucketed so
    each distinct Pauli pair is multiplied once.
    """
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    n = p1.num_qubits
    if group == "clifford":
        if n > 2:
            raise ValueError("Clifford twirl supported for n <= 2")
        xs, zs, ph = _conjugation_table(n)
        k1, k2 = (p1.x_mask << n) | p1.z_mask, (p2.x_mask << n) | p2.z_mask
        phases = np.asarray(_PHASES)
        weights = phases[(ph[:, k1] + p1.phase) % 4] * phases[(ph[:, k2] + p2.phase) % 4]
        keys = np.stack([xs[:, k1], zs[:, k1], xs[:, k2], zs[:, k2]], axis=1)
        uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
        sums = np.zeros(len(uniq), dtype=complex)
        np.add.at(sums, inverse.ravel(), weights)
        acc = np.zeros_like(m)
        for (ax, az, bx, bz), c in zip(uniq.tolist(), sums):
            if abs(c) > 1e-12:
                acc += c * (_xz_matrix(n, ax, az) @ m @ _xz_matrix(n, bx, bz))
        return acc / len(xs)
    elif group == "pauli":
        if n > 3:
            raise ValueError("Pauli twirl supported for n <= 3")
        paulis = list(all_paulis(n))
        # g p g^dag = (+-1) p for a Pauli g
        images = (
            (
                PauliOperator(n, p1.x_mask, p1.z_mask, p1.phase + (0 if commutes(g, p1) else 2)),
                PauliOperator(n, p2.x_mask, p2.z_mask, p2.phase + (0 if commutes(g, p2) else 2)),
            )
            for g in paulis
        )
        size = len(paulis)
    else:
        raise ValueError(f"unknown group {group!r}")
    buckets: dict[tuple, complex] = {}
    for a, b in images:
        key = (a.x_mask, a.z_mask, b.x_mask, b.z_mask)
        buckets[key] = buckets.get(key, 0) + _PHASES[a.phase] * _PHASES[b.phase]
    acc = np.zeros_like(m)
    for (ax, az, bx, bz), c in buckets.items():
        if abs(c) > 1e-12:
            acc += c * (_xz_matrix(n, ax, az) @ m @ _xz_matrix(n, bx, bz))
    return acc / size


def dense_twirl_average(rho, p1: PauliOperator, p2: PauliOperator, unitaries: Sequence[np.ndarray]) -> np.ndarray:
    """Reference implementation of the twirl over explicit unitaries."""
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    a, b = p1.to_matrix(), p2.to_matrix()
    acc = np.zeros_like(m)
    for u in unitaries:
        ud = u.conj().T
        acc += ud @ a @ u @ m @ ud @ b @ u
    return acc / len(unitaries)


# qudit Paulis


@dataclass(frozen=True)
class QuditPauli:
    """omega^phase * prod_j X^{x_j} Z^{z_j} on t qudits of prime dimension q."""

    q: int
    num_qudits: int
    x_powers: tuple
    z_powers: tuple
    phase: int = 0

    def __post_init__(self):
        if len(self.x_powers) != self.num_qudits or len(self.z_powers) != self.num_qudits:
            raise ValueError("power vectors must have length t")
        object.__setattr__(self, "x_powers", tuple(int(v) % self.q for v in self.x_powers))
        object.__setattr__(self, "z_powers", tuple(int(v) % self.q for v in self.z_powers))
        object.__setattr__(self, "phase", self.phase % self.q)

    @classmethod
    def identity(cls, q: int, t: int) -> "QuditPauli":
        return cls(q, t, (0,) * t, (0,) * t)

    @classmethod
    def single(cls, q: int, t: int, position: int, x: int, z: int) -> "QuditPauli":
        xs, zs = [0] * t, [0] * t
        xs[position], zs[position] = x, z
        return cls(q, t, tuple(xs), tuple(zs))

    def is_identity(self) -> bool:
        return not any(self.x_powers) and not any(self.z_powers)

    def weight(self) -> int:
        return sum(1 for a, b in zip(self.x_powers, self.z_powers) if a or b)

    def __mul__(self, other: "QuditPauli") -> "QuditPauli":
        k = self.phase + other.phase + sum(a * b for a, b in zip(self.z_powers, other.x_powers))
        return QuditPauli(
            self.q,
            self.num_qudits,
            tuple(a + b for a, b in zip(self.x_powers, other.x_powers)),
            tuple(a + b for a, b in zip(self.z_powers, other.z_powers)),
            k,
        )

    def dagger(self) -> "QuditPauli":
        # (X^x Z^z)^dag = Z^-z X^-x = omega^{x.z} X^-x Z^-z
        k = -self.phase + sum(a * b for a, b in zip(self.x_powers, self.z_powers))
        return QuditPauli(
            self.q, self.num_qudits, tuple(-a for a in self.x_powers), tuple(-b for b in self.z_powers), k
        )

    def apply(self, amps: np.ndarray) -> np.ndarray:
        """Act on a flat q^t amplitude array (or a stack with trailing axis q^t)."""
        q, t = self.q, self.num_qudits
        digits = _qudit_digits(q, t)
        omega = np.exp(2j * np.pi / q)
        zphase = omega ** ((digits @ np.array(self.z_powers) + self.phase) % q)
        shifted = (digits + np.array(self.x_powers)) % q
        dest = shifted @ (q ** np.arange(t - 1, -1, -1))
        out = np.zeros_like(amps)
        out[..., dest] = amps * zphase
        return out

    def to_matrix(self) -> np.ndarray:
        dim = self.q**self.num_qudits
        return self.apply(np.eye(dim, dtype=complex).T).T


@functools.lru_cache(maxsize=None)
def _qudit_digits(q: int, t: int) -> np.ndarray:
    idx = np.arange(q**t)
    digits = np.stack([(idx // q ** (t - 1 - j)) % q for j in range(t)], axis=1)
    digits.setflags(write=False)
    return digits


def all_qudit_paulis(q: int, t: int, include_identity: bool = True) -> Iterator[QuditPauli]:
    from itertools import product

    for xs in product(range(q), repeat=t):
        for zs in product(range(q), repeat=t):
            p = QuditPauli(q, t, xs, zs)
            if include_identity or not p.is_identity():
                yield p


def qudit_twirl_average(rho: np.ndarray, p1: QuditPauli, p2: QuditPauli) -> np.ndarray:
    """(1/q^{2t}) sum_Q Q^dag p1 Q rho Q^dag p2^dag Q over the qudit Pauli group."""
    a, b = p1.to_matrix(), p2.dagger().to_matrix()
    acc = np.zeros_like(rho, dtype=complex)
    count = 0
    for g in all_qudit_paulis(p1.q, p1.num_qudits):
        gm = g.to_matrix()
        gd = gm.conj().T
        acc += gd @ a @ gm @ rho @ gd @ b @ gm
        count += 1
    return acc / count
