"""Deterministic Pauli-exponential synthesis and CNOT accounting.

Each string ``P`` of weight ``w`` becomes: basis change onto Z, a CNOT ladder
collecting parity on the highest support qubit, ``RZ(2 c theta)``, and the
mirror image, i.e. ``2(w-1)`` CNOTs in a strictly sequential chain.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .pauli import CapacityError, PauliString, PauliSum

UNITARY_QUBIT_LIMIT = 10
SINGLE_QUBIT = ("H", "S", "SDG")
_INVERSE = {"H": "H", "S": "SDG", "SDG": "S", "CNOT": "CNOT"}


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple[int, ...]
    angle: float | None = None

    def __post_init__(self):
        if self.kind == "CNOT":
            if len(self.qubits) != 2 or self.qubits[0] == self.qubits[1]:
                raise ValueError(f"bad CNOT qubits {self.qubits}")
        elif self.kind == "RZ":
            if len(self.qubits) != 1 or self.angle is None:
                raise ValueError("RZ needs one qubit and an angle")
        elif self.kind in SINGLE_QUBIT:
            if len(self.qubits) != 1:
                raise ValueError(f"{self.kind} acts on one qubit")
        else:
            raise ValueError(f"unknown gate kind {self.kind!r}")

    def dumps(self) -> str:
        args = " ".join(str(q) for q in self.qubits)
        return f"{self.kind} {args} {self.angle!r}" if self.kind == "RZ" else f"{self.kind} {args}"


@dataclass
class Circuit:
    n: int
    gates: list[Gate] = field(default_factory=list)

    def append(self, g: Gate):
        if any(q < 0 or q >= self.n for q in g.qubits):
            raise ValueError(f"gate {g.dumps()} outside {self.n} qubits")
        self.gates.append(g)

    def extend(self, gates: Iterable[Gate]):
        for g in gates:
            self.append(g)

    def __add__(self, other: "Circuit") -> "Circuit":
        if other.n != self.n:
            raise ValueError("circuit widths differ")
        return Circuit(self.n, self.gates + other.gates)

    @property
    def cnot_count(self) -> int:
        return sum(g.kind == "CNOT" for g in self.gates)

    @property
    def rz_count(self) -> int:
        return sum(g.kind == "RZ" for g in self.gates)

    def dumps(self) -> str:
        return "\n".join(g.dumps() for g in self.gates)

    @classmethod
    def loads(cls, text: str, n: int) -> "Circuit":
        c = cls(n)
        for line in text.splitlines():
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "RZ":
                c.append(Gate("RZ", (int(parts[1]),), float(parts[2])))
            else:
                c.append(Gate(parts[0], tuple(int(p) for p in parts[1:])))
        return c


def _basis_in(s: PauliString) -> list[Gate]:
    out = []
    for q in sorted(s.support):
        letter = s.letter(q)
        if letter == "X":
            out.append(Gate("H", (q,)))
        elif letter == "Y":
            out += [Gate("SDG", (q,)), Gate("H", (q,))]
    return out


def _basis_out(s: PauliString) -> list[Gate]:
    out = []
    for q in sorted(s.support):
        letter = s.letter(q)
        if letter == "X":
            out.append(Gate("H", (q,)))
        elif letter == "Y":
            out += [Gate("H", (q,)), Gate("S", (q,))]
    return out


def synthesize_string(s: PauliString, angle: float) -> list[Gate]:
    """Gates for ``exp(-i angle P)``; the identity string yields no gates (global phase)."""
    sup = sorted(s.support)
    if not sup:
        return []
    ladder = [Gate("CNOT", (a, b)) for a, b in zip(sup, sup[1:])]
    return _basis_in(s) + ladder + [Gate("RZ", (sup[-1],), 2.0 * angle)] + ladder[::-1] + _basis_out(s)


def term_order(op: PauliSum) -> list[tuple[float, PauliString]]:
    """Terms sorted by (lowest support qubit, label)."""
    terms = []
    for t in op:
        if abs(t.coeff.imag) > 1e-12:
            raise ValueError("synthesis needs a Hermitian operator with real Pauli weights")
        sup = t.string.support
        terms.append((min(sup) if sup else -1, t.string.label, t.coeff.real, t.string))
    terms.sort(key=lambda r: (r[0], r[1]))
    return [(c, s) for _, _, c, s in terms]


def synthesize_exponential(op: PauliSum, theta: float) -> Circuit:
    """``exp(-i theta O)``; exact for commuting terms, first-order product otherwise."""
    if not op.is_hermitian():
        raise ValueError("exponent generator must be Hermitian")
    c = Circuit(op.n)
    for coeff, s in term_order(op):
        c.extend(synthesize_string(s, coeff * theta))
    return c


def cnot_depth(c: Circuit) -> int:
    """Longest qubit-dependency path counting only CNOT nodes."""
    level = [0] * c.n
    for g in c.gates:
        if g.kind == "CNOT":
            a, b = g.qubits
            level[a] = level[b] = max(level[a], level[b]) + 1
    return max(level, default=0)


class DepthTracker:
    """Incremental CNOT count and depth for a circuit that only grows."""

    def __init__(self, n: int):
        self.n = n
        self.level = [0] * n
        self.cnots = 0
        self.rz = 0

    def add(self, gates: Iterable[Gate]):
        for g in gates:
            if g.kind == "CNOT":
                a, b = g.qubits
                self.level[a] = self.level[b] = max(self.level[a], self.level[b]) + 1
                self.cnots += 1
            elif g.kind == "RZ":
                self.rz += 1

    @property
    def depth(self) -> int:
        return max(self.level, default=0)


def cancel_adjacent(c: Circuit) -> Circuit:
    """Remove adjacent inverse pairs (CNOT-CNOT, H-H, S-SDG) until none remain."""
    out: list[Gate | None] = []
    stacks: list[list[int]] = [[] for _ in range(c.n)]
    for g in c.gates:
        tops = {stacks[q][-1] if stacks[q] else -1 for q in g.qubits}
        if g.kind != "RZ" and len(tops) == 1:
            top = tops.pop()
            prev = out[top] if top >= 0 else None
            if prev is not None and prev.qubits == g.qubits and prev.kind == _INVERSE[g.kind]:
                out[top] = None
                for q in g.qubits:
                    stacks[q].pop()
                continue
        out.append(g)
        for q in g.qubits:
            stacks[q].append(len(out) - 1)
    return Circuit(c.n, [g for g in out if g is not None])


@dataclass(frozen=True)
class ResourceSummary:
    cnot_count: int
    cnot_depth: int
    rz_count: int


def ansatz_circuit(generators: Sequence[PauliSum], thetas: Sequence[float], n: int | None = None) -> Circuit:
    if len(generators) != len(thetas):
        raise ValueError("one angle per generator required")
    if n is None:
        n = generators[0].n if generators else 0
    c = Circuit(n)
    for op, th in zip(generators, thetas):
        c.extend(synthesize_exponential(op, th).gates)
    return c


def ansatz_resources(
    generators: Sequence[PauliSum], thetas: Sequence[float] | None = None, n: int | None = None, peephole: bool = False
) -> ResourceSummary:
    if thetas is None:
        thetas = [0.0] * len(generators)
    c = ansatz_circuit(generators, thetas, n)
    if peephole:
        c = cancel_adjacent(c)
    return ResourceSummary(c.cnot_count, cnot_depth(c), c.rz_count)


# dense oracle ----------------------------------------------------------

_SINGLE = {
    "H": np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2),
    "S": np.diag([1, 1j]),
    "SDG": np.diag([1, -1j]),
}


def _apply_single(psi: np.ndarray, n: int, q: int, u: np.ndarray) -> np.ndarray:
    v = psi.reshape(1 << (n - q - 1), 2, 1 << q)
    return np.einsum("ab,ibj->iaj", u, v).reshape(-1)


def circuit_unitary(c: Circuit, max_qubits: int = UNITARY_QUBIT_LIMIT) -> np.ndarray:
    """Dense unitary in the little-endian index convention (oracle use only)."""
    if c.n > max_qubits:
        raise CapacityError(f"circuit unitary limited to {max_qubits} qubits")
    dim = 1 << c.n
    idx = np.arange(dim)
    cols = []
    for b in range(dim):
        psi = np.zeros(dim, dtype=complex)
        psi[b] = 1.0
        for g in c.gates:
            if g.kind == "CNOT":
                ctl, tgt = g.qubits
                psi = psi[np.where((idx >> ctl) & 1, idx ^ (1 << tgt), idx)]
            elif g.kind == "RZ":
                (q,) = g.qubits
                phase = np.where((idx >> q) & 1, np.exp(0.5j * g.angle), np.exp(-0.5j * g.angle))
                psi = psi * phase
            else:
                psi = _apply_single(psi, c.n, g.qubits[0], _SINGLE[g.kind])
        cols.append(psi)
    return np.array(cols).T
