"""Inner variational minimisation: adjoint gradients and a BFGS driver."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import line_search

try:  # not exported publicly; its base class is RuntimeWarning
    from scipy.optimize._linesearch import LineSearchWarning
except ImportError:  # pragma: no cover
    LineSearchWarning = RuntimeWarning

from .pauli import PauliSum
from .state import compile_op, exponential

GTOL = 1e-6
MAX_ITER = 1000
C1, C2 = 1e-4, 0.9


class ObjectiveHandle:
    """Energy of ``prod_j exp(-i theta_j O_j) |ref>`` (first generator applied first)."""

    def __init__(self, H: PauliSum, reference: np.ndarray, generators: Sequence[PauliSum], mode: str = "exact"):
        self.H = compile_op(H)
        self.reference = np.ascontiguousarray(reference, dtype=np.complex128)
        self.generators = list(generators)
        self.exps = [exponential(g, mode) for g in self.generators]
        self.compiled = [compile_op(g) for g in self.generators]
        self.n_evals = 0
        self.n_grads = 0
        self._last_theta: np.ndarray | None = None
        self._last_state: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.generators)

    def _check(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (len(self.generators),):
            raise ValueError(f"expected {len(self.generators)} angles, got shape {theta.shape}")
        return theta

    def state(self, theta) -> np.ndarray:
        theta = self._check(theta)
        if self._last_theta is not None and np.array_equal(theta, self._last_theta):
            return self._last_state.copy()
        psi = self.reference.copy()
        for e, t in zip(self.exps, theta):
            e.apply_inplace(psi, float(t))
        self._last_theta, self._last_state = theta.copy(), psi
        return psi.copy()

    def evaluate(self, theta) -> float:
        self.n_evals += 1
        psi = self.state(theta)
        return float(self.H.overlap(psi, psi).real)

    def analytic_gradient(self, theta) -> np.ndarray:
        """Forward sweep then one backward sweep: O(k) operator applications."""
        theta = self._check(theta)
        self.n_grads += 1
        pair = np.empty((2, len(self.reference)), dtype=np.complex128)
        pair[0] = self.state(theta)
        pair[1] = self.H.apply(pair[0])
        psi, lam = pair
        grad = np.empty(len(theta))
        for j in range(len(theta) - 1, -1, -1):
            grad[j] = 2.0 * self.compiled[j].overlap(lam, psi).imag
            if j:
                self.exps[j].apply_rows_inplace(pair, -float(theta[j]))
        return grad


@dataclass
class OptimizeResult:
    theta: np.ndarray
    energy: float
    grad_norm: float
    iterations: int
    n_evals: int
    n_grads: int
    converged: bool
    warning: str | None = None


def bfgs(
    fun: Callable[[np.ndarray], float],
    grad: Callable[[np.ndarray], np.ndarray],
    x0,
    gtol: float = GTOL,
    max_iter: int = MAX_ITER,
) -> tuple[np.ndarray, float, np.ndarray, int, str | None]:
    """BFGS with a strong-Wolfe line search; returns the best point seen.

    Returns ``(x, f, g, iterations, warning)``.
    """
    x = np.array(x0, dtype=float)
    f = fun(x)
    g = grad(x)
    n = len(x)
    Hinv = np.eye(n)
    best = (f, x.copy(), g.copy())
    it = 0
    warning = None
    f_old = None
    while it < max_iter and np.max(np.abs(g), initial=0.0) > gtol:
        p = -Hinv @ g
        if g @ p >= 0:
            Hinv = np.eye(n)
            p = -g
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", LineSearchWarning)
            alpha, _, _, f_new, _, g_new = line_search(fun, grad, x, p, gfk=g, old_fval=f, old_old_fval=f_old, c1=C1, c2=C2)
        if alpha is None and not np.array_equal(Hinv, np.eye(n)):
            # retry once along steepest descent
            Hinv = np.eye(n)
            p = -g
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", LineSearchWarning)
                alpha, _, _, f_new, _, g_new = line_search(fun, grad, x, p, gfk=g, old_fval=f, c1=C1, c2=C2)
        if alpha is None:
            warning = "line search failed"
            break
        s = alpha * p
        x_new = x + s
        if g_new is None:
            g_new = grad(x_new)
        y = g_new - g
        sy = float(s @ y)
        if sy > 1e-16 * max(1.0, float(np.linalg.norm(s) * np.linalg.norm(y))):
            rho = 1.0 / sy
            Hy = Hinv @ y
            Hinv = Hinv - rho * (np.outer(s, Hy) + np.outer(Hy, s)) + (rho * rho * (y @ Hy) + rho) * np.outer(s, s)
        f_old, x, f, g = f, x_new, float(f_new), g_new
        it += 1
        if f <= best[0]:
            best = (f, x.copy(), g.copy())
    if it >= max_iter and np.max(np.abs(g), initial=0.0) > gtol:
        warning = "maximum iterations reached"
    f, x, g = best
    return x, f, g, it, warning


def minimize(
    handle: ObjectiveHandle, theta0=None, gtol: float = GTOL, max_iter: int = MAX_ITER
) -> OptimizeResult:
    if theta0 is None:
        theta0 = np.zeros(len(handle))
    e0, g0 = handle.n_evals, handle.n_grads
    x, f, g, it, warning = bfgs(handle.evaluate, handle.analytic_gradient, theta0, gtol, max_iter)
    gn = float(np.max(np.abs(g), initial=0.0))
    return OptimizeResult(
        theta=x,
        energy=f,
        grad_norm=gn,
        iterations=it,
        n_evals=handle.n_evals - e0,
        n_grads=handle.n_grads - g0,
        converged=gn <= gtol,
        warning=warning,
    )
