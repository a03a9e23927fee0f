"""Accuracy and symmetry metrics plus the one-body (mean-field) reference."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import build_hamiltonian, ModelParams, reference_state
from .optimizer import ObjectiveHandle, minimize
from .pauli import PauliSum
from .pools import build_topdown_pool
from .state import ConvergenceError, compile_op

MEAN_FIELD_TOL = 1e-8
MEAN_FIELD_LAYERS = 500


def energy_density_error(E: float, E0: float, L: int) -> float:
    return (E - E0) / L


def delta_T(psi: np.ndarray) -> float:
    """``min_phi |Im(e^{i phi} psi)| / |Re(e^{i phi} psi)|`` in closed form.

    The squared norms of the rotated real and imaginary parts are the quadratic
    form of the Gram matrix of ``(Re psi, Im psi)`` on orthogonal unit vectors,
    so the optimum is ``sqrt(lambda_min / lambda_max)``.
    """
    a, b = psi.real, psi.imag
    aa, bb, ab = float(a @ a), float(b @ b), float(a @ b)
    mean = 0.5 * (aa + bb)
    r = math.hypot(0.5 * (aa - bb), ab)
    lmax, lmin = mean + r, max(mean - r, 0.0)
    if lmax <= 0.0:
        return math.inf
    return math.sqrt(lmin / lmax)


def charge_moments(psi: np.ndarray, Q: PauliSum) -> tuple[float, float]:
    """``(<Q>, <Q^2> - <Q>^2)`` for a diagonal charge operator."""
    if not Q.is_diagonal():
        raise ValueError("charge operator must be diagonal")
    d = compile_op(Q).diag
    p = np.abs(psi) ** 2
    if d is None:
        return 0.0, 0.0
    d = d.real
    mean = float(p @ d)
    var = float(p @ (d * d)) - mean * mean
    return mean, max(var, 0.0)


@dataclass
class MeanFieldResult:
    state: np.ndarray
    energy: float
    converged: bool
    method: str = "single-excitation layers"
    generators: list[PauliSum] = field(default_factory=list)
    thetas: list[float] = field(default_factory=list)
    max_gradient: float = 0.0
    layers: int = 0


def mean_field(
    H: PauliSum | ModelParams,
    L: int | None = None,
    reference: np.ndarray | None = None,
    tol: float = MEAN_FIELD_TOL,
    max_layers: int = MEAN_FIELD_LAYERS,
) -> MeanFieldResult:
    """Lowest energy over the single-excitation orbit of the reference.

    Layers of the largest-gradient Z-string generator (all distances) are
    appended and every angle re-optimised until all such gradients fall below
    ``tol``.
    """
    if isinstance(H, ModelParams):
        L = H.L
        H = build_hamiltonian(H)
    if L is None:
        L = H.n // 2
    if reference is None:
        reference = reference_state(L)
    pool = build_topdown_pool("xQZ", L, {"all_distances": True})
    compiled = [compile_op(o.op) for o in pool]
    Hc = compile_op(H)
    gens: list[PauliSum] = []
    theta = np.zeros(0)
    handle = ObjectiveHandle(H, reference, gens)
    for layer in range(max_layers + 1):
        psi = handle.state(theta)
        hpsi = Hc.apply(psi)
        grads = np.array([2.0 * c.overlap(hpsi, psi).imag for c in compiled])
        gmax = float(np.max(np.abs(grads)))
        if gmax <= tol:
            energy = float(Hc.overlap(psi, psi).real)
            return MeanFieldResult(psi, energy, True, generators=gens, thetas=list(theta), max_gradient=gmax, layers=layer)
        if layer == max_layers:
            break
        gens = gens + [pool[int(np.argmax(np.abs(grads)))].op]
        handle = ObjectiveHandle(H, reference, gens)
        res = minimize(handle, np.append(theta, 0.0), gtol=tol * 1e-2)
        theta = res.theta
    raise ConvergenceError(f"mean-field layers exceeded {max_layers} (max gradient {gmax:.3e})")
