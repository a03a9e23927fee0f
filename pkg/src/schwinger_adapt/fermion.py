"""Second-quantized polynomials and the (reverse) Jordan-Wigner map.

A monomial is a tuple of ``(mode, dagger)`` ladder operators read left to
right.  Normal order puts creators left of annihilators, each group sorted by
descending mode, e.g. ``a3^ a1^ a4 a1``.
"""
from __future__ import annotations

from typing import Mapping

from .pauli import CapacityError, PauliSum, annihilation, creation

Ladder = tuple[int, bool]
Monomial = tuple[Ladder, ...]

REVERSE_JW_LIMIT = 8


class FermionOperator:
    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[Monomial, complex] | None = None):
        self.terms = {tuple(k): complex(v) for k, v in (terms or {}).items() if abs(v) > 1e-14}

    @classmethod
    def from_str(cls, text: str, coeff: complex = 1.0) -> "FermionOperator":
        """Parse ``"3^ 1^ 4 1"`` style monomials (``^`` marks a creator)."""
        mono = []
        for tok in text.split():
            dag = tok.endswith("^")
            mono.append((int(tok.rstrip("^")), dag))
        return cls({tuple(mono): coeff})

    def __add__(self, other: "FermionOperator") -> "FermionOperator":
        acc = dict(self.terms)
        for k, v in other.terms.items():
            acc[k] = acc.get(k, 0) + v
        return FermionOperator(acc)

    def __mul__(self, other):
        if isinstance(other, (int, float, complex)):
            return FermionOperator({k: v * other for k, v in self.terms.items()})
        acc: dict[Monomial, complex] = {}
        for k1, v1 in self.terms.items():
            for k2, v2 in other.terms.items():
                acc[k1 + k2] = acc.get(k1 + k2, 0) + v1 * v2
        return FermionOperator(acc)

    __rmul__ = __mul__

    def normal_ordered(self) -> "FermionOperator":
        acc: dict[Monomial, complex] = {}
        for mono, c in self.terms.items():
            for k, v in _normal_order(mono).items():
                acc[k] = acc.get(k, 0) + c * v
        return FermionOperator(acc)

    def allclose(self, other: "FermionOperator", atol: float = 1e-12) -> bool:
        a, b = self.normal_ordered().terms, other.normal_ordered().terms
        return all(abs(a.get(k, 0) - b.get(k, 0)) <= atol for k in set(a) | set(b))

    def body_counts(self) -> list[tuple[int, int]]:
        """(creators, annihilators) for every monomial."""
        return [(sum(d for _, d in m), sum(not d for _, d in m)) for m in self.terms]

    def __len__(self):
        return len(self.terms)

    def __repr__(self):
        parts = []
        for mono, c in sorted(self.terms.items()):
            word = " ".join(f"a{m}^" if d else f"a{m}" for m, d in mono) or "1"
            parts.append(f"({c:.6g}) {word}")
        return " + ".join(parts) or "0"


def _normal_order(mono: Monomial) -> dict[Monomial, complex]:
    # bubble sort with canonical anticommutation relations
    out: dict[Monomial, complex] = {}
    stack = [(list(mono), 1 + 0j)]
    while stack:
        ops, coeff = stack.pop()
        swapped = False
        for i in range(len(ops) - 1):
            (m1, d1), (m2, d2) = ops[i], ops[i + 1]
            if d1 == d2:
                if m1 == m2:
                    coeff = 0
                    break
                if m1 < m2:
                    ops[i], ops[i + 1] = ops[i + 1], ops[i]
                    coeff = -coeff
                    swapped = True
            elif not d1 and d2:
                if m1 == m2:
                    # a_m a_m^ = 1 - a_m^ a_m
                    stack.append((ops[:i] + ops[i + 2:], coeff))
                ops[i], ops[i + 1] = ops[i + 1], ops[i]
                coeff = -coeff
                swapped = True
        if coeff == 0:
            continue
        if swapped:
            stack.append((ops, coeff))
        else:
            key = tuple(ops)
            out[key] = out.get(key, 0) + coeff
    return {k: v for k, v in out.items() if abs(v) > 1e-14}


def jordan_wigner(op: FermionOperator, n: int) -> PauliSum:
    """Qubit image with ``a_j = Z_0 ... Z_{j-1} sigma^-_j``."""
    total = PauliSum.zero(n)
    for mono, c in op.terms.items():
        term = PauliSum.identity(n, c)
        for mode, dag in mono:
            term = term * (creation(mode, n) if dag else annihilation(mode, n))
        total = total + term
    return total


def _single_qubit_fermionic(letter: str, q: int) -> FermionOperator:
    # sigma^-_q = (prod_{k<q} (1 - 2 n_k)) a_q, sigma^+ likewise with a_q^
    def parity_string():
        f = FermionOperator({(): 1.0})
        for k in range(q):
            f = f * FermionOperator({(): 1.0, ((k, True), (k, False)): -2.0})
        return f

    if letter == "Z":
        return FermionOperator({(): 1.0, ((q, True), (q, False)): -2.0})
    up = parity_string() * FermionOperator({((q, True),): 1.0})
    down = parity_string() * FermionOperator({((q, False),): 1.0})
    if letter == "X":
        return (up + down).normal_ordered()
    # Y = i (sigma^+ - sigma^-)
    return (up * 1j + down * -1j).normal_ordered()


def reverse_jordan_wigner(s: PauliSum, max_qubits: int = REVERSE_JW_LIMIT) -> FermionOperator:
    """Normal-ordered fermionic polynomial whose Jordan-Wigner image is ``s``."""
    if s.n > max_qubits:
        raise CapacityError(f"{s.n} qubits exceeds the reverse-JW guard of {max_qubits}")
    total = FermionOperator()
    for t in s:
        f = FermionOperator({(): t.coeff})
        for q in range(s.n):
            letter = t.string.letter(q)
            if letter != "I":
                f = (f * _single_qubit_fermionic(letter, q)).normal_ordered()
        total = total + f
    return total.normal_ordered()


def fermionic_single_excitation(p: int, q: int) -> FermionOperator:
    """``a_p^ a_q``."""
    return FermionOperator({((p, True), (q, False)): 1.0})


__all__ = [
    "FermionOperator",
    "jordan_wigner",
    "reverse_jordan_wigner",
    "fermionic_single_excitation",
]
