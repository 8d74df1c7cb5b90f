"""Independent radial solver for the ground-state equation, used to cross-check
the box solution.

The profile lives on the ball of radius ``R_d`` and is expanded in the radial
Dirichlet eigenfunctions

    phi_k(r) = r^{1-N/2} J_{N/2-1}(j_k r / R_d),

on which (-Delta)^s acts as the multiplier (j_k/R_d)^{2s}. Projections of the
source |x|^{-b} Q^p use composite Gauss quadrature on panels graded towards the
origin, with a Gauss-Jacobi panel absorbing r^{N-1-b} exactly. Nothing is
shared with the Cartesian FFT discretization except the equation itself.
"""

from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import ConvergenceError, DomainError

__all__ = ["RadialGroundState", "solve_radial_ground_state", "compare_with_grid"]


@dataclass
class RadialGroundState:
    radius: float
    order: float
    zeros: np.ndarray
    coeffs: np.ndarray
    iterations: int
    change: float

    def __call__(self, r, chunk=2048):
        """Evaluate Q at radii ``r`` (any shape)."""
        r = np.asarray(r, dtype=float)
        flat = r.ravel()
        out = np.empty_like(flat)
        for i in range(0, flat.size, chunk):
            out[i : i + chunk] = _basis(flat[i : i + chunk], self.zeros, self.radius, self.order) @ self.coeffs
        return out.reshape(r.shape)


def _bessel_zeros(order, count):
    if order == 0:
        return special.jn_zeros(0, count)
    if order == 0.5:
        return np.pi * np.arange(1, count + 1)
    raise DomainError(f"unsupported Bessel order {order}")


def _basis(r, zeros, R, nu):
    z = np.multiply.outer(r, zeros / R)
    if nu == 0:
        return special.j0(z)
    # r^{-1/2} J_{1/2}(k r) = sqrt(2/(pi k)) sin(k r)/r, continuous at r = 0
    k = zeros / R
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(z > 0, np.sin(z) / np.where(z > 0, z, 1.0), 1.0)
    return out * np.sqrt(2 / (np.pi * k)) * k


def _quadrature(R, dim, b, panels, order=8, grading=24):
    """Nodes/weights for int_0^R g(r) r^{dim-1-b} dr with graded panels near 0."""
    beta = dim - 1 - b
    width = R / panels
    edges = [width * 2.0**-i for i in range(grading, 0, -1)]
    edges += list(width * np.arange(1, panels + 1))
    x, wt = special.roots_legendre(order)
    xj, wj = special.roots_jacobi(order, 0.0, beta)
    r0 = edges[0]
    nodes = [r0 * (1 + xj) / 2]
    weights = [wj * (r0 / 2) ** (beta + 1)]
    for a, c in zip(edges[:-1], edges[1:]):
        rr = a + (c - a) * (1 + x) / 2
        nodes.append(rr)
        weights.append(wt * (c - a) / 2 * rr**beta)
    return np.concatenate(nodes), np.concatenate(weights)


def solve_radial_ground_state(params, radius=48.0, modes=1500, tol=1e-11, max_iter=2000):
    """Petviashvili iteration on the Dirichlet-Bessel coefficients.

    Returns a callable profile. ``radius`` must be large compared with the
    algebraic tail of Q (which decays like r^{-(N+2s)}).
    """
    N, s, b, p = params.dim, params.s, params.b, params.p
    nu = N / 2 - 1
    zeros = _bessel_zeros(nu, modes)
    lam = 1.0 + (zeros / radius) ** (2 * s)
    # int_0^R phi_k^2 r^{N-1} dr
    norms = radius**2 / 2 * special.jv(nu + 1, zeros) ** 2
    rq, wq = _quadrature(radius, N, b, panels=2 * modes)
    phi = _basis(rq, zeros, radius, nu)
    wphi = phi * wq[:, None]

    # start from a Gaussian projected on the basis
    g = np.exp(-(rq**2) / 2)
    c = (wphi.T @ (g * rq**b)) / norms
    gamma = p / (p - 1)
    change = np.inf
    for it in range(1, max_iter + 1):
        Q = phi @ c
        src = np.abs(Q) ** (p - 1) * Q
        f = (wphi.T @ src) / norms
        S = np.sum(norms * lam * c * c) / np.sum(norms * c * f)
        if not np.isfinite(S) or S <= 0:
            raise ConvergenceError(f"radial iteration diverged at step {it} (S={S})")
        cn = S**gamma * f / lam
        change = float(np.sqrt(np.sum(norms * (cn - c) ** 2) / np.sum(norms * cn * cn)))
        c = cn
        if change < tol:
            break
    else:
        raise ConvergenceError(f"radial iteration stalled (change {change:.2e})")
    return RadialGroundState(radius, nu, zeros, c, it, change)


def compare_with_grid(ground, oracle):
    """Relative L^2 distance on the box grid between the grid Q and the oracle."""
    grid = ground.grid
    r = grid.radius
    uniq, inv = np.unique(np.round(r, 12), return_inverse=True)
    ref = oracle(uniq)[inv].reshape(r.shape)
    Q = np.real(ground.Q.values)
    diff = np.sqrt(np.sum((Q - ref) ** 2))
    return float(diff / np.sqrt(np.sum(ref**2)))
