"""Dense statevector engine.

States are plain complex128 numpy arrays of length ``2**n`` in the little-endian
packing of :mod:`schwinger_adapt.pauli`.
"""
from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass
from threading import Lock

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh, eigh_tridiagonal, schur

from .kernels import CompiledOperator
from .pauli import CapacityError, PauliString, PauliSum

STATE_QUBIT_LIMIT = 24
DENSE_EIG_LIMIT = 14
# exact exponentials of non-commuting sums use block eigendecompositions up to here
BLOCK_QUBIT_LIMIT = 14
BLOCK_LIMIT = 1024
NORM_TOL = 1e-12
LANCZOS_BYTES = 4 << 30


class NotHermitianError(ValueError):
    pass


class ConvergenceError(RuntimeError):
    pass


_CACHE: "OrderedDict[PauliSum, object]" = OrderedDict()
_CACHE_LOCK = Lock()
_CACHE_SIZE = 8192


def _cached(op: PauliSum, kind: str, factory):
    key = (kind, op)
    with _CACHE_LOCK:
        hit = _CACHE.get(key)
        if hit is not None:
            _CACHE.move_to_end(key)
            return hit
    value = factory(op)
    with _CACHE_LOCK:
        _CACHE[key] = value
        if len(_CACHE) > _CACHE_SIZE:
            _CACHE.popitem(last=False)
    return value


def compile_op(op: PauliSum | CompiledOperator) -> CompiledOperator:
    if isinstance(op, CompiledOperator):
        return op
    return _cached(op, "compiled", CompiledOperator)


def new_state(n: int) -> np.ndarray:
    if n > STATE_QUBIT_LIMIT:
        raise CapacityError(f"{n} qubits exceeds the statevector guard of {STATE_QUBIT_LIMIT}")
    return np.zeros(1 << n, dtype=np.complex128)


def basis_state(n: int, index: int) -> np.ndarray:
    psi = new_state(n)
    psi[index] = 1.0
    return psi


def _all_commute(op: PauliSum) -> bool:
    keys = list(op.items())
    for i, ((x1, z1), _) in enumerate(keys):
        for (x2, z2), _ in keys[i + 1:]:
            if bin((x1 & z2) ^ (z1 & x2)).count("1") % 2:
                return False
    return True


class PauliExponential:
    """Action of ``exp(-i theta O)`` for a Hermitian Pauli sum ``O``.

    Mutually commuting strings are applied as an exact product of rotations.
    Otherwise the exact mode diagonalises ``O`` on its invariant blocks, or
    falls back to a scaled Taylor expansion when a block is too large;
    ``mode="trotter"`` forces the first-order product.
    """

    def __init__(self, op: PauliSum, mode: str = "exact"):
        if not op.is_hermitian():
            raise NotHermitianError("exponent generator must be Hermitian")
        if mode not in ("exact", "trotter"):
            raise ValueError(f"unknown exponential mode {mode!r}")
        self.op = op
        self.mode = mode
        self.compiled = compile_op(op)
        self.rotations = self.compiled.rotate_terms()
        self.commuting = _all_commute(op)
        self.norm = op.norm_bound()
        self.blocks = None
        if not self.product_form:
            self.blocks = _block_spectra(op)

    @property
    def product_form(self) -> bool:
        return self.commuting or self.mode == "trotter"

    def apply_inplace(self, psi: np.ndarray, theta: float) -> np.ndarray:
        if theta == 0.0:
            return psi
        if self.product_form:
            rot = self.compiled.kern.rotate_string
            for x, z, phase, w in self.rotations:
                rot(psi, x, z, phase, theta * w)
            return psi
        if self.blocks is not None:
            self.apply_rows_inplace(psi[None, :], theta)
            return psi
        psi[:] = self._taylor(psi, theta)
        return psi

    def apply_rows_inplace(self, rows: np.ndarray, theta: float) -> np.ndarray:
        """Apply to every row of a ``(m, 2^n)`` stack of states in place.

        One pass over each block matrix serves all rows, which roughly halves
        the cost of the backward gradient sweep.
        """
        if theta == 0.0:
            return rows
        if self.blocks is None:
            for r in rows:
                self.apply_inplace(r, theta)
            return rows
        m = rows.shape[0]
        for blk in self.blocks:
            kind, ids = blk[0], blk[1]
            amp = rows[:, ids].transpose(1, 0, 2)  # (blocks, m, size)
            if kind == "complex":
                _, _, w, vc, vt = blk
                amp = np.matmul(amp, vc)
                amp *= np.exp(-1j * theta * w)[:, None, :]
                amp = np.matmul(amp, vt)
            else:
                basis, basis_t = blk[2], blk[3]
                x = np.matmul(np.concatenate([amp.real, amp.imag], axis=1), basis)
                if kind == "antisym":
                    # exp(theta A) rotates each invariant plane (p, q) by theta * omega
                    p, q, omega = blk[4], blk[5], blk[6]
                    c, sn = np.cos(theta * omega)[:, None, :], np.sin(theta * omega)[:, None, :]
                    xp = np.take_along_axis(x, p[:, None, :], axis=2)
                    xq = np.take_along_axis(x, q[:, None, :], axis=2)
                    np.put_along_axis(x, p[:, None, :], c * xp + sn * xq, axis=2)
                    np.put_along_axis(x, q[:, None, :], c * xq - sn * xp, axis=2)
                else:
                    # real symmetric: phases mix the real and imaginary rows
                    ang = theta * blk[4][:, None, :]
                    c, sn = np.cos(ang), np.sin(ang)
                    xr, xi = x[:, :m], x[:, m:]
                    x = np.concatenate([c * xr + sn * xi, c * xi - sn * xr], axis=1)
                x = np.matmul(x, basis_t)
                amp = x[:, :m] + 1j * x[:, m:]
            rows[:, ids] = amp.transpose(1, 0, 2)
        return rows

    def apply(self, psi: np.ndarray, theta: float) -> np.ndarray:
        return self.apply_inplace(np.array(psi, dtype=np.complex128, copy=True), theta)

    def _taylor(self, psi: np.ndarray, theta: float, tol: float = 1e-16, max_terms: int = 80) -> np.ndarray:
        steps = max(1, math.ceil(abs(theta) * self.norm))
        tau = theta / steps
        out = psi.copy()
        scratch = np.empty_like(psi)
        for _ in range(steps):
            term = out.copy()
            acc = out.copy()
            scale = max(np.linalg.norm(out), 1e-300)
            for k in range(1, max_terms + 1):
                self.compiled.apply(term, out=scratch)
                term, scratch = scratch * (-1j * tau / k), term
                acc += term
                if np.linalg.norm(term) <= tol * scale:
                    break
            else:
                raise ConvergenceError("Taylor series for the exponential did not converge")
            out = acc
        return out


def _gf2_basis(masks) -> list[int]:
    basis: list[int] = []
    for m in masks:
        for b in basis:
            m = min(m, m ^ b)
        if m:
            basis.append(m)
            basis.sort(reverse=True)
    return basis


def _block_spectra(op: PauliSum, max_block: int = BLOCK_LIMIT):
    """Eigendecompositions of ``op`` on its invariant blocks, batched by block size.

    Basis states mix only within cosets of the span of the X masks; when ``op``
    also conserves Hamming weight the cosets split further by weight.  Returns
    ``None`` when some block exceeds ``max_block`` or the register is too large.
    """
    n = op.n
    if n > BLOCK_QUBIT_LIMIT:
        return None
    idx = np.arange(1 << n, dtype=np.uint64)
    coset = idx.copy()
    for b in _gf2_basis([x for (x, _), _ in op.items()]):
        top = np.uint64(1 << (b.bit_length() - 1))
        hit = (coset & top) != 0
        coset[hit] ^= np.uint64(b)
    label = coset.astype(np.int64)
    total_z = PauliSum.from_terms(n, [(1.0, PauliString(n, 0, 1 << k)) for k in range(n)])
    if (op * total_z - total_z * op).is_zero():
        label = label * (n + 1) + np.bitwise_count(idx).astype(np.int64)
    order = np.argsort(label, kind="stable")
    bounds = np.flatnonzero(np.diff(label[order])) + 1
    groups = np.split(order, bounds)
    if max(len(g) for g in groups) > max_block:
        return None
    m = sparse_matrix(op)
    by_size: dict[int, list[np.ndarray]] = {}
    for g in groups:
        by_size.setdefault(len(g), []).append(g)
    out = []
    for size, gs in sorted(by_size.items()):
        ids = np.array(gs)
        mats = np.stack([m[g][:, g].toarray() for g in gs])
        if not np.any(mats):
            continue
        if not np.any(mats.imag):
            # real symmetric: real eigenvectors, complex phases only
            w, v = np.linalg.eigh(mats.real)
            out.append(("sym", ids, np.ascontiguousarray(v), np.ascontiguousarray(v.transpose(0, 2, 1)), w))
        elif not np.any(mats.real):
            out.append(("antisym", ids) + _plane_rotations(mats.imag))
        else:
            w, v = np.linalg.eigh(mats)
            out.append(("complex", ids, w, np.ascontiguousarray(v.conj()), np.ascontiguousarray(v.transpose(0, 2, 1))))
    return out


def _plane_rotations(A: np.ndarray):
    """Real Schur data for a stack of real antisymmetric matrices.

    ``A = Z T Z^T`` with ``T`` made of 2x2 blocks ``[[0, w], [-w, 0]]``; unpaired
    (zero) directions are paired with each other at ``w = 0`` so every block
    carries ``size // 2`` planes.
    """
    nb, size, _ = A.shape
    Z = np.empty_like(A)
    P = np.empty((nb, size // 2), dtype=np.intp)
    Qi = np.empty_like(P)
    W = np.zeros((nb, size // 2))
    for b in range(nb):
        T, Z[b] = schur(A[b], output="real")
        pairs, free, k = [], [], 0
        while k < size:
            if k + 1 < size and T[k + 1, k] != 0.0:
                pairs.append((k, k + 1, 0.5 * (T[k, k + 1] - T[k + 1, k])))
                k += 2
            else:
                free.append(k)
                k += 1
        pairs += [(free[i], free[i + 1], 0.0) for i in range(0, len(free) - 1, 2)]
        for j, (p, q, w) in enumerate(pairs):
            P[b, j], Qi[b, j], W[b, j] = p, q, w
    return np.ascontiguousarray(Z), np.ascontiguousarray(Z.transpose(0, 2, 1)), P, Qi, W


def exponential(op: PauliSum, mode: str = "exact") -> PauliExponential:
    return _cached(op, f"exp-{mode}", lambda o: PauliExponential(o, mode))


def apply_pauli_exponential(psi: np.ndarray, op: PauliSum, theta: float, mode: str = "exact") -> np.ndarray:
    """Return ``exp(-i theta op) psi`` (input untouched)."""
    return exponential(op, mode).apply(psi, theta)


def apply_operator(psi: np.ndarray, op: PauliSum | CompiledOperator) -> np.ndarray:
    return compile_op(op).apply(psi)


def expectation(psi: np.ndarray, op: PauliSum | CompiledOperator, tol: float = 1e-10) -> float:
    val = compile_op(op).overlap(psi, psi)
    if abs(val.imag) > tol:
        raise NotHermitianError(f"expectation has imaginary part {val.imag:.3e}")
    return float(val.real)


def pool_gradient(
    psi: np.ndarray,
    op: PauliSum | CompiledOperator,
    H: PauliSum | CompiledOperator | None = None,
    hpsi: np.ndarray | None = None,
) -> float:
    """``d/dtheta <psi| e^{i theta O} H e^{-i theta O} |psi>`` at ``theta = 0``.

    Equals ``2 Im <H psi | O psi>``; pass ``hpsi`` to reuse ``H psi`` across a pool.
    """
    if hpsi is None:
        if H is None:
            raise ValueError("need H or a precomputed H|psi>")
        hpsi = compile_op(H).apply(psi)
    return 2.0 * compile_op(op).overlap(hpsi, psi).imag


def fidelity(psi: np.ndarray, phi: np.ndarray) -> float:
    if psi.shape != phi.shape:
        raise ValueError("states act on different registers")
    return float(min(1.0, abs(np.vdot(psi, phi)) ** 2))


def norm(psi: np.ndarray) -> float:
    return float(np.linalg.norm(psi))


# exact ground states ---------------------------------------------------


@dataclass
class GroundStateResult:
    energy: float
    state: np.ndarray
    residual: float
    method: str
    iterations: int = 0


def sparse_matrix(op: PauliSum) -> sp.csr_matrix:
    """Sparse matrix by direct index arithmetic (independent of the Kronecker path)."""
    if op.n > STATE_QUBIT_LIMIT:
        raise CapacityError(f"{op.n} qubits exceeds the statevector guard")
    dim = 1 << op.n
    idx = np.arange(dim, dtype=np.uint64)
    rows, cols, data = [], [], []
    for (x, z), c in op.items():
        y = bin(x & z).count("1")
        sign = 1.0 - 2.0 * (np.bitwise_count(idx & np.uint64(z)) & 1)
        rows.append(idx ^ np.uint64(x))
        cols.append(idx)
        data.append(c * (1j**y) * sign)
    if not data:
        return sp.csr_matrix((dim, dim), dtype=complex)
    m = sp.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows).astype(np.int64), np.concatenate(cols).astype(np.int64))),
        shape=(dim, dim),
    ).tocsr()
    m.sum_duplicates()
    return m


def _residual(H: CompiledOperator, psi: np.ndarray, e: float) -> float:
    return float(np.linalg.norm(H.apply(psi) - e * psi))


def _dense_ground_state(H: PauliSum) -> GroundStateResult:
    if H.n > DENSE_EIG_LIMIT:
        raise CapacityError(f"dense eigensolve limited to {DENSE_EIG_LIMIT} qubits")
    m = sparse_matrix(H).toarray()
    if np.abs(m.imag).max(initial=0.0) == 0.0:
        m = m.real
    w, v = eigh(m, subset_by_index=[0, 0])
    psi = np.ascontiguousarray(v[:, 0], dtype=np.complex128)
    psi /= np.linalg.norm(psi)
    e = float(w[0])
    return GroundStateResult(e, psi, _residual(compile_op(H), psi, e), "dense")


def _lanczos_ground_state(
    H: PauliSum,
    tol: float = 1e-10,
    seed: int = 1234,
    krylov_dim: int | None = None,
    max_restarts: int = 500,
) -> GroundStateResult:
    Hc = compile_op(H)
    dim = 1 << H.n
    if krylov_dim is None:
        # keep the basis under ~1 GiB
        krylov_dim = int(max(20, min(100, (1 << 30) // (16 * dim))))
    krylov_dim = min(krylov_dim, dim)
    if krylov_dim * dim * 16 > LANCZOS_BYTES:
        raise CapacityError(f"Krylov basis of {krylov_dim} x 2^{H.n} amplitudes exceeds {LANCZOS_BYTES >> 30} GiB")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(dim).astype(np.complex128)
    v /= np.linalg.norm(v)
    basis = np.empty((krylov_dim, dim), dtype=np.complex128)
    w = np.empty(dim, dtype=np.complex128)
    total = 0
    for restart in range(max_restarts):
        alphas, betas = [], []
        basis[0] = v
        m = krylov_dim
        for j in range(krylov_dim):
            Hc.apply(basis[j], out=w)
            total += 1
            alpha = float(np.vdot(basis[j], w).real)
            alphas.append(alpha)
            # full reorthogonalisation, twice for stability
            for _ in range(2):
                w -= basis[: j + 1].T @ (basis[: j + 1].conj() @ w)
            beta = float(np.linalg.norm(w))
            if j == krylov_dim - 1 or beta < 1e-14:
                m = j + 1
                break
            betas.append(beta)
            basis[j + 1] = w / beta
        if m == 1:
            theta, s = np.array([alphas[0]]), np.ones((1, 1))
        else:
            theta, s = eigh_tridiagonal(np.array(alphas), np.array(betas[: m - 1]), select="i", select_range=(0, 0))
        x = s[:, 0] @ basis[:m]
        x /= np.linalg.norm(x)
        e = float(theta[0])
        # refine the eigenvalue by the Rayleigh quotient of the Ritz vector
        e = float(np.vdot(x, Hc.apply(x)).real)
        res = _residual(Hc, x, e)
        total += 2
        if res <= tol:
            return GroundStateResult(e, x, res, "lanczos", total)
        v = x
    raise ConvergenceError(f"Lanczos residual {res:.3e} above {tol:g} after {max_restarts} restarts")


def ground_state(H: PauliSum, method: str = "dense", **kwargs) -> GroundStateResult:
    if H.n > STATE_QUBIT_LIMIT:
        raise CapacityError(f"{H.n} qubits exceeds the statevector guard of {STATE_QUBIT_LIMIT}")
    if method == "dense":
        return _dense_ground_state(H)
    if method == "lanczos":
        return _lanczos_ground_state(H, **kwargs)
    raise ValueError(f"unknown ground-state method {method!r}")


def dump_amplitudes(psi: np.ndarray, path) -> None:
    """Raw little-endian complex128 dump (debugging aid, n <= 16)."""
    if len(psi) > (1 << 16):
        raise CapacityError("amplitude dumps are limited to 16 qubits")
    np.asarray(psi, dtype="<c16").tofile(path)


def load_amplitudes(path) -> np.ndarray:
    return np.fromfile(path, dtype="<c16")
