"""Declarative prover deviations and the prover factory."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import qsim
from .pauli import all_paulis

KINDS = ("honest", "pauli", "unitary", "corrupt_copy", "flip_reports", "wrong_angle")


@dataclass(frozen=True)
class AttackSpec:
    """One named deviation.

    ``round`` is the index of the verifier instruction at (or after) which a
    quantum attack fires; ``None`` fires at the first instruction where the
    prover holds the target and -1 fires just before the final measurement.
    ``mask`` for ``flip_reports`` is an int whose bit k flips the k-th
    reported bit, or -1 for every bit.
    """

    kind: str = "honest"
    pauli: str = ""
    qubit: int = 0
    round: int | None = None
    matrix: tuple | None = None
    qubits: tuple = ()
    index: int = 0
    vertex: int = 0
    mask: int = 0
    offset: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown attack kind {self.kind!r}")
        if self.kind in ("pauli", "corrupt_copy"):
            if not self.pauli or any(c not in "IXYZ" for c in self.pauli.upper()):
                raise ValueError("pauli attacks need a label over I, X, Y, Z")
            object.__setattr__(self, "pauli", self.pauli.upper())
        if self.kind == "unitary":
            if self.matrix is None or not self.qubits:
                raise ValueError("unitary attacks need a matrix and qubits")
            m = np.asarray(self.matrix, dtype=complex)
            if m.shape != (2 ** len(self.qubits),) * 2 or np.max(np.abs(m @ m.conj().T - np.eye(m.shape[0]))) > 1e-9:
                raise ValueError("attack matrix must be unitary on the given qubits")
        if self.kind == "wrong_angle" and self.offset % 8 == 0:
            raise ValueError("wrong_angle needs a nonzero offset mod 8")
        if self.round is not None and self.round < -1:
            raise ValueError("round must be nonnegative, or -1 for the final measurement")

    @classmethod
    def honest(cls) -> "AttackSpec":
        return cls()

    @classmethod
    def from_dict(cls, d: dict) -> "AttackSpec":
        d = dict(d)
        if "matrix" in d and d["matrix"] is not None:
            d["matrix"] = _parse_matrix(d["matrix"])
        if "qubits" in d:
            d["qubits"] = tuple(int(q) for q in d["qubits"])
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown attack fields {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        for k in self.__dataclass_fields__:
            v = getattr(self, k)
            if k != "kind" and v not in ("", 0, None, ()):
                out[k] = [[[c.real, c.imag] for c in row] for row in v] if k == "matrix" else v
        return out

    def local_ops(self) -> list[tuple[int, np.ndarray]]:
        """(qubit, 2x2 matrix) list for pauli attacks; a single joint op otherwise."""
        if self.kind == "pauli":
            letters = self.pauli
            if len(letters) == 1:
                return [(self.qubit, qsim.GATES[letters])]
            return [(self.qubit + k, qsim.GATES[c]) for k, c in enumerate(letters) if c != "I"]
        if self.kind == "unitary":
            if len(self.qubits) != 1:
                raise ValueError("this host applies unitary attacks to one qubit at a time")
            return [(self.qubits[0], np.asarray(self.matrix, dtype=complex))]
        return []

    def flips(self, k: int) -> bool:
        return self.mask == -1 or bool((self.mask >> k) & 1)

    @property
    def is_honest(self) -> bool:
        return self.kind == "honest"


def _parse_matrix(m) -> tuple:
    rows = []
    for row in m:
        rows.append(tuple(complex(*c) if isinstance(c, (list, tuple)) else complex(c) for c in row))
    return tuple(rows)


def kraus_pauli_decompose(matrix: np.ndarray, n: int | None = None) -> dict[str, complex]:
    """Coefficients a_P with K = sum_P a_P P over hermitian Pauli strings.

    a_P = Tr(P K) / 2^n. Defined for n <= 2.
    """
    m = np.asarray(matrix, dtype=complex)
    dim = m.shape[0]
    if m.shape != (dim, dim) or dim & (dim - 1):
        raise ValueError("matrix must be square with power-of-two size")
    n_q = dim.bit_length() - 1
    if n is not None and n != n_q:
        raise ValueError("n does not match the matrix size")
    if n_q > 2:
        raise ValueError("decomposition is limited to two qubits")
    return {p.letters(): complex(np.trace(p.to_matrix() @ m) / dim) for p in all_paulis(n_q)}


def pauli_reconstruct(coeffs: dict[str, complex]) -> np.ndarray:
    from .pauli import PauliOperator

    return sum(a * PauliOperator.from_label(lbl).to_matrix() for lbl, a in coeffs.items())


PROTOCOLS = ("childs", "ubqc", "vubqc", "toc", "cqas", "mo", "posthoc")


def make_prover(protocol: str, spec: AttackSpec | None = None, rng: np.random.Generator | None = None):
    """Prover for ``protocol`` that follows the honest strategy except for ``spec``."""
    import importlib

    spec = spec or AttackSpec.honest()
    table = {
        "childs": ("prepsend", "ChildsProver", {"honest", "pauli", "unitary", "flip_reports"}),
        "ubqc": ("prepsend", "MBQCProver", {"honest", "pauli", "unitary", "flip_reports", "wrong_angle"}),
        "vubqc": ("prepsend", "MBQCProver", {"honest", "pauli", "unitary", "flip_reports", "wrong_angle"}),
        "toc": ("prepsend", "ToCProver", {"honest", "pauli", "unitary", "flip_reports"}),
        "cqas": ("prepsend", "CQASProver", {"honest", "pauli", "unitary"}),
        "mo": ("recvmeas", "MOProver", {"honest", "corrupt_copy", "flip_reports"}),
        "posthoc": ("recvmeas", "PosthocProver", {"honest", "pauli"}),
    }
    if protocol not in table:
        raise ValueError(f"unknown protocol {protocol!r}")
    module, name, kinds = table[protocol]
    cls = getattr(importlib.import_module(f"vqlab.{module}"), name)
    if spec.kind not in kinds:
        raise ValueError(f"attack {spec.kind} is not supported by {protocol}")
    return cls(attack=spec, rng=rng)


def qubit_indices(spec: AttackSpec) -> Sequence[int]:
    return [q for q, _ in spec.local_ops()]
