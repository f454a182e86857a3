"""Nelder-Mead simplex minimizer.

Small dependency-free implementation used by the model fitter. The
iteration is the usual reflect / expand / contract / shrink cycle with
coefficients (1, 2, 0.5, 0.5); the search stops once the simplex
diameter, measured as the largest vertex distance from the current best
point, drops below diameter_tol, or after max_iter iterations.
Everything is deterministic for a given starting point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_REFLECT = 1.0
_EXPAND = 2.0
_CONTRACT = 0.5
_SHRINK = 0.5


@dataclass
class MinimizeResult:
    x: np.ndarray
    fun: float
    iterations: int
    nfev: int
    converged: bool


def nelder_mead(fn, x0, step: float = 0.5, max_iter: int = 2000,
                diameter_tol: float = 1e-8) -> MinimizeResult:
    """Minimize fn from x0 with an axis-aligned starting simplex.

    fn maps a 1-d float array to a float and may return +inf for
    infeasible points.
    """
    x0 = np.asarray(x0, dtype=float)
    dim = x0.size
    if dim == 0:
        raise ValueError("need at least one coordinate")
    vertices = np.tile(x0, (dim + 1, 1))
    for i in range(dim):
        vertices[i + 1, i] += step
    values = np.array([fn(v) for v in vertices])
    nfev = dim + 1

    iterations = 0
    converged = False
    while iterations < max_iter:
        iterations += 1
        order = np.argsort(values, kind="stable")
        vertices = vertices[order]
        values = values[order]

        diameter = np.sqrt(((vertices[1:] - vertices[0]) ** 2)
                           .sum(axis=1)).max()
        if diameter < diameter_tol:
            converged = True
            break

        centroid = vertices[:-1].mean(axis=0)
        worst = vertices[-1]
        reflected = centroid + _REFLECT * (centroid - worst)
        f_reflected = fn(reflected)
        nfev += 1

        if f_reflected < values[0]:
            expanded = centroid + _EXPAND * (reflected - centroid)
            f_expanded = fn(expanded)
            nfev += 1
            if f_expanded < f_reflected:
                vertices[-1], values[-1] = expanded, f_expanded
            else:
                vertices[-1], values[-1] = reflected, f_reflected
        elif f_reflected < values[-2]:
            vertices[-1], values[-1] = reflected, f_reflected
        else:
            if f_reflected < values[-1]:
                # outside contraction
                candidate = centroid + _CONTRACT * (reflected - centroid)
            else:
                # inside contraction
                candidate = centroid - _CONTRACT * (centroid - worst)
            f_candidate = fn(candidate)
            nfev += 1
            if f_candidate < min(f_reflected, values[-1]):
                vertices[-1], values[-1] = candidate, f_candidate
            else:
                best = vertices[0]
                for i in range(1, dim + 1):
                    vertices[i] = best + _SHRINK * (vertices[i] - best)
                    values[i] = fn(vertices[i])
                nfev += dim

    order = np.argsort(values, kind="stable")
    return MinimizeResult(
        x=vertices[order[0]].copy(),
        fun=float(values[order[0]]),
        iterations=iterations,
        nfev=nfev,
        converged=converged,
    )
