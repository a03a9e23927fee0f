"""Sparse Pauli-string algebra.

A Pauli string on ``n`` qubits is stored as two integer bit masks ``(x, z)``:
bit ``q`` of ``x`` marks an X component on qubit ``q``, bit ``q`` of ``z`` a Z
component, both bits together a Y.  Strings carry no phase; every phase lives in
the complex coefficient of a term.  Labels are printed with qubit 0 leftmost.

Amplitude storage uses the same little-endian packing (qubit ``q`` is bit ``q``
of the basis index), so a string acts on a basis state ``|b>`` as::

    P|b> = i**y_count * (-1)**popcount(b & z) |b ^ x>
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

import numpy as np

PRUNE_TOL = 1e-14
DENSE_QUBIT_LIMIT = 14

_LETTER_BITS = {"I": (0, 0), "X": (1, 0), "Z": (0, 1), "Y": (1, 1)}
_BITS_LETTER = {v: k for k, v in _LETTER_BITS.items()}
_I_POW = (1, 1j, -1, -1j)

_PAULI_2x2 = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class DimensionError(ValueError):
    """Operands act on different numbers of qubits."""


class CapacityError(ValueError):
    """Requested dense object exceeds the configured qubit guard."""


def _popcount(v: int) -> int:
    return bin(v).count("1")


@dataclass(frozen=True, order=True)
class PauliString:
    n: int
    x: int = 0
    z: int = 0

    def __post_init__(self):
        full = (1 << self.n) - 1
        if self.x & ~full or self.z & ~full:
            raise ValueError(f"mask does not fit in {self.n} qubits")

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        x = z = 0
        for q, ch in enumerate(label.upper()):
            try:
                bx, bz = _LETTER_BITS[ch]
            except KeyError:
                raise ValueError(f"bad Pauli letter {ch!r} in {label!r}") from None
            x |= bx << q
            z |= bz << q
        return cls(len(label), x, z)

    @classmethod
    def from_sparse(cls, n: int, ops: Mapping[int, str]) -> "PauliString":
        """Build from ``{qubit: letter}``; unspecified qubits are identity."""
        letters = ["I"] * n
        for q, ch in ops.items():
            if not 0 <= q < n:
                raise IndexError(f"qubit {q} outside 0..{n - 1}")
            letters[q] = ch
        return cls.from_label("".join(letters))

    @property
    def label(self) -> str:
        return "".join(
            _BITS_LETTER[((self.x >> q) & 1, (self.z >> q) & 1)] for q in range(self.n)
        )

    @property
    def weight(self) -> int:
        return _popcount(self.x | self.z)

    @property
    def y_count(self) -> int:
        return _popcount(self.x & self.z)

    @property
    def support(self) -> frozenset[int]:
        m = self.x | self.z
        return frozenset(q for q in range(self.n) if (m >> q) & 1)

    def letter(self, q: int) -> str:
        return _BITS_LETTER[((self.x >> q) & 1, (self.z >> q) & 1)]

    def commutes_with(self, other: "PauliString") -> bool:
        return _popcount((self.x & other.z) ^ (self.z & other.x)) % 2 == 0

    def shifted(self, k: int, n: int | None = None) -> "PauliString":
        """Translate by ``k`` qubits into an ``n``-qubit register (default: same n)."""
        n = self.n if n is None else n
        if k >= 0:
            return PauliString(n, self.x << k, self.z << k)
        return PauliString(n, self.x >> -k, self.z >> -k)

    def __str__(self) -> str:
        return self.label


@dataclass(frozen=True)
class PauliTerm:
    coeff: complex
    string: PauliString

    @classmethod
    def from_label(cls, label: str, coeff: complex = 1.0) -> "PauliTerm":
        return cls(complex(coeff), PauliString.from_label(label))

    @property
    def n(self) -> int:
        return self.string.n


def multiply(a: PauliTerm, b: PauliTerm) -> PauliTerm:
    """Exact product of two weighted Pauli strings."""
    if a.n != b.n:
        raise DimensionError(f"{a.n} vs {b.n} qubits")
    coeff, string = _mul_strings(a.string, b.string)
    return PauliTerm(a.coeff * b.coeff * coeff, string)


def _mul_strings(p: PauliString, q: PauliString) -> tuple[complex, PauliString]:
    # each string is i^{x.z} X^x Z^z; reordering Z^z1 X^x2 costs (-1)^{z1.x2}
    x = p.x ^ q.x
    z = p.z ^ q.z
    k = _popcount(p.x & p.z) + _popcount(q.x & q.z) - _popcount(x & z) + 2 * _popcount(p.z & q.x)
    return _I_POW[k % 4], PauliString(p.n, x, z)


class PauliSum:
    """Complex-weighted sum of Pauli strings, keyed by ``(x, z)`` masks.

    Instances are treated as immutable; every operation returns a new sum.
    """

    __slots__ = ("n", "_terms")

    def __init__(self, n: int, terms: Mapping[tuple[int, int], complex] | None = None):
        self.n = int(n)
        clean: dict[tuple[int, int], complex] = {}
        if terms:
            full = (1 << self.n) - 1
            for (x, z), c in terms.items():
                if x & ~full or z & ~full:
                    raise ValueError(f"mask does not fit in {self.n} qubits")
                c = complex(c)
                if abs(c) > PRUNE_TOL:
                    clean[(int(x), int(z))] = c
        self._terms = clean

    # construction ------------------------------------------------------

    @classmethod
    def from_terms(cls, n: int, items: Iterable[tuple[complex, PauliString]]) -> "PauliSum":
        acc: dict[tuple[int, int], complex] = {}
        for c, s in items:
            if s.n != n:
                raise DimensionError(f"string on {s.n} qubits in a {n}-qubit sum")
            key = (s.x, s.z)
            acc[key] = acc.get(key, 0) + c
        return cls(n, acc)

    @classmethod
    def from_labels(cls, items: Mapping[str, complex] | Iterable[tuple[str, complex]]) -> "PauliSum":
        pairs = list(items.items()) if isinstance(items, Mapping) else list(items)
        if not pairs:
            raise ValueError("need at least one label to fix the qubit count")
        n = len(pairs[0][0])
        return cls.from_terms(n, ((c, PauliString.from_label(lab)) for lab, c in pairs))

    @classmethod
    def identity(cls, n: int, coeff: complex = 1.0) -> "PauliSum":
        return cls(n, {(0, 0): coeff})

    @classmethod
    def zero(cls, n: int) -> "PauliSum":
        return cls(n)

    @classmethod
    def single(cls, string: PauliString, coeff: complex = 1.0) -> "PauliSum":
        return cls(string.n, {(string.x, string.z): coeff})

    # access ------------------------------------------------------------

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self) -> Iterator[PauliTerm]:
        for (x, z), c in self._sorted_items():
            yield PauliTerm(c, PauliString(self.n, x, z))

    def _sorted_items(self):
        return sorted(self._terms.items(), key=lambda kv: PauliString(self.n, *kv[0]).label)

    def items(self):
        return self._terms.items()

    def coeff(self, string: PauliString | str) -> complex:
        if isinstance(string, str):
            string = PauliString.from_label(string)
        return self._terms.get((string.x, string.z), 0j)

    @property
    def strings(self) -> list[PauliString]:
        return [t.string for t in self]

    def is_zero(self) -> bool:
        return not self._terms

    def support(self) -> frozenset[int]:
        m = 0
        for x, z in self._terms:
            m |= x | z
        return frozenset(q for q in range(self.n) if (m >> q) & 1)

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        # strings are Hermitian, so the sum is Hermitian iff every weight is real
        return all(abs(c.imag) <= tol for c in self._terms.values())

    def is_diagonal(self) -> bool:
        return all(x == 0 for x, _ in self._terms)

    def norm_bound(self) -> float:
        """Triangle-inequality bound on the operator 2-norm."""
        return sum(abs(c) for c in self._terms.values())

    # algebra -----------------------------------------------------------

    def _check(self, other: "PauliSum"):
        if self.n != other.n:
            raise DimensionError(f"{self.n} vs {other.n} qubits")

    def __add__(self, other):
        if isinstance(other, (int, float, complex)):
            other = PauliSum.identity(self.n, other)
        self._check(other)
        acc = dict(self._terms)
        for k, c in other._terms.items():
            acc[k] = acc.get(k, 0) + c
        return PauliSum(self.n, acc)

    __radd__ = __add__

    def __neg__(self):
        return PauliSum(self.n, {k: -c for k, c in self._terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float, complex, np.number)):
            return PauliSum(self.n, {k: c * other for k, c in self._terms.items()})
        if not isinstance(other, PauliSum):
            return NotImplemented
        self._check(other)
        acc: dict[tuple[int, int], complex] = {}
        for (x1, z1), c1 in self._terms.items():
            p = PauliString(self.n, x1, z1)
            for (x2, z2), c2 in other._terms.items():
                ph, s = _mul_strings(p, PauliString(self.n, x2, z2))
                key = (s.x, s.z)
                acc[key] = acc.get(key, 0) + c1 * c2 * ph
        return PauliSum(self.n, acc)

    def __rmul__(self, other):
        if isinstance(other, (int, float, complex, np.number)):
            return self * other
        return NotImplemented

    def __truediv__(self, other):
        return self * (1.0 / other)

    def __eq__(self, other):
        if not isinstance(other, PauliSum):
            return NotImplemented
        return self.n == other.n and self._terms == other._terms

    def __hash__(self):
        return hash((self.n, frozenset(self._terms.items())))

    def allclose(self, other: "PauliSum", atol: float = 1e-12) -> bool:
        if self.n != other.n:
            return False
        keys = set(self._terms) | set(other._terms)
        return all(abs(self._terms.get(k, 0) - other._terms.get(k, 0)) <= atol for k in keys)

    def dagger(self) -> "PauliSum":
        return PauliSum(self.n, {k: c.conjugate() for k, c in self._terms.items()})

    def real(self) -> "PauliSum":
        return PauliSum(self.n, {k: c.real for k, c in self._terms.items()})

    def shifted(self, k: int, n: int | None = None) -> "PauliSum":
        """Translate every string by ``k`` qubits, dropping terms that leave the register."""
        n = self.n if n is None else n
        full = (1 << n) - 1
        acc = {}
        for (x, z), c in self._terms.items():
            if k >= 0:
                nx, nz = x << k, z << k
            else:
                if (x | z) & ((1 << -k) - 1):
                    continue
                nx, nz = x >> -k, z >> -k
            if (nx | nz) & ~full:
                continue
            acc[(nx, nz)] = c
        return PauliSum(n, acc)

    def key(self, digits: int = 12) -> tuple:
        """Hashable, rounding-tolerant identity used for de-duplication."""
        return tuple(
            (x, z, round(c.real, digits) + 0.0, round(c.imag, digits) + 0.0)
            for (x, z), c in sorted(self._terms.items())
        )

    # text / dense ------------------------------------------------------

    def dumps(self) -> str:
        return "\n".join(f"{t.coeff.real!r} {t.coeff.imag!r} {t.string.label}" for t in self)

    @classmethod
    def loads(cls, text: str, n: int | None = None) -> "PauliSum":
        items = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(f"line {lineno}: expected '<re> <im> <letters>', got {line!r}")
            re, im, lab = parts
            items.append((complex(float(re), float(im)), PauliString.from_label(lab)))
        if not items:
            if n is None:
                raise ValueError("empty Pauli sum with unknown qubit count")
            return cls(n)
        n0 = items[0][1].n if n is None else n
        return cls.from_terms(n0, items)

    def __repr__(self) -> str:
        if not self._terms:
            return f"PauliSum(n={self.n}, 0)"
        body = " + ".join(f"({_fmt(t.coeff)}){t.string.label}" for t in self)
        return f"PauliSum({body})"

    def to_matrix(self, max_qubits: int = DENSE_QUBIT_LIMIT) -> np.ndarray:
        return to_matrix(self, max_qubits)


def _fmt(c: complex) -> str:
    if c.imag == 0:
        return f"{c.real:.6g}"
    if c.real == 0:
        return f"{c.imag:.6g}j"
    return f"{c:.6g}"


def commutator(a: PauliSum, b: PauliSum) -> PauliSum:
    """``ab - ba``; only anticommuting string pairs contribute (twice their product)."""
    if a.n != b.n:
        raise DimensionError(f"{a.n} vs {b.n} qubits")
    acc: dict[tuple[int, int], complex] = {}
    for (x1, z1), c1 in a.items():
        p = PauliString(a.n, x1, z1)
        for (x2, z2), c2 in b.items():
            if _popcount((x1 & z2) ^ (z1 & x2)) % 2 == 0:
                continue
            ph, s = _mul_strings(p, PauliString(a.n, x2, z2))
            key = (s.x, s.z)
            acc[key] = acc.get(key, 0) + 2 * c1 * c2 * ph
    return PauliSum(a.n, acc)


def support(s: PauliString | PauliSum) -> frozenset[int]:
    return s.support if isinstance(s, PauliString) else s.support()


def is_time_reversal_odd(s: PauliSum) -> bool:
    """True iff every string has an odd number of Y factors.

    Such a Hermitian operator is purely imaginary as a matrix, so ``exp(-i t O)``
    is real and keeps real wave functions real.
    """
    return len(s) > 0 and all(_popcount(x & z) % 2 == 1 for x, z in s._terms)


def to_matrix(s: PauliSum, max_qubits: int = DENSE_QUBIT_LIMIT) -> np.ndarray:
    """Dense matrix by Kronecker products (qubit 0 is the least significant index bit)."""
    if s.n > max_qubits:
        raise CapacityError(f"{s.n} qubits exceeds the dense guard of {max_qubits}")
    dim = 1 << s.n
    out = np.zeros((dim, dim), dtype=complex)
    for t in s:
        m = np.ones((1, 1), dtype=complex)
        for q in reversed(range(s.n)):
            m = np.kron(m, _PAULI_2x2[t.string.letter(q)])
        out += t.coeff * m
    return out


def basis_index(bits: str) -> int:
    """Amplitude index of a computational basis state printed with qubit 0 first."""
    return sum(1 << q for q, ch in enumerate(bits) if ch == "1")


def basis_label(index: int, n: int) -> str:
    return "".join("1" if (index >> q) & 1 else "0" for q in range(n))


def sigma_plus(q: int, n: int) -> PauliSum:
    """Raising operator ``(X - iY)/2``; takes |0> to |1> (occupied)."""
    return PauliSum.from_terms(
        n,
        [(0.5, PauliString.from_sparse(n, {q: "X"})), (-0.5j, PauliString.from_sparse(n, {q: "Y"}))],
    )


def sigma_minus(q: int, n: int) -> PauliSum:
    return sigma_plus(q, n).dagger()


def z_string(lo: int, hi: int, n: int) -> PauliString:
    """``Z_lo ... Z_{hi-1}`` (empty range gives identity)."""
    return PauliString.from_sparse(n, {k: "Z" for k in range(lo, hi)})


def annihilation(j: int, n: int) -> PauliSum:
    """Jordan-Wigner image of ``a_j``: ``Z_0 ... Z_{j-1} sigma^-_j``."""
    return PauliSum.single(z_string(0, j, n)) * sigma_minus(j, n)


def creation(j: int, n: int) -> PauliSum:
    return annihilation(j, n).dagger()


def number_operator(j: int, n: int) -> PauliSum:
    return creation(j, n) * annihilation(j, n)

