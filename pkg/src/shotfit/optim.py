"""Damped least-squares engine shared by the fitting modules.

Levenberg-Marquardt with box-bound projection and an optional extra
projection hook (used for per-joint rotation-norm balls). Robust terms
enter as robustified residual vectors built by the energy assemblers, so
the solver itself only ever sees plain least squares.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import NonFiniteResidual


def geman_mcclure(x: float, c: float) -> float:
    """Bounded robust error x^2 / (x^2 + c^2) in [0, 1)."""
    if c <= 0:
        raise ValueError("scale c must be positive")
    x2 = x * x
    return x2 / (x2 + c * c)


def geman_mcclure_deriv(x: float, c: float) -> float:
    """d/dx of geman_mcclure: 2 x c^2 / (x^2 + c^2)^2."""
    if c <= 0:
        raise ValueError("scale c must be positive")
    denom = x * x + c * c
    return 2.0 * x * c * c / (denom * denom)


@dataclass
class OptimProblem:
    """Least-squares problem over a flat parameter vector.

    residual_jac(x) returns (r, J) with J of shape (len(r), len(x)).
    lower/upper are box bounds (+-inf allowed); project, when given, is an
    extra feasibility projection applied after the box clip. term_slices
    names residual blocks for the per-term energy breakdown.
    """

    x0: np.ndarray
    residual_jac: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    project: Optional[Callable[[np.ndarray], np.ndarray]] = None
    term_slices: dict = field(default_factory=dict)


@dataclass
class OptimReport:
    initial_energy: float
    final_energy: float
    iterations: int
    converged: bool
    term_energies: dict

    def __post_init__(self):
        if self.final_energy > self.initial_energy + 1e-12:
            raise ValueError("final energy exceeds initial energy")


def _clip(x, lower, upper):
    if lower is not None:
        x = np.maximum(x, lower)
    if upper is not None:
        x = np.minimum(x, upper)
    return x


def _projected_gradient(g, x, lower, upper):
    """Zero out gradient components that push against an active bound."""
    pg = g.copy()
    if lower is not None:
        pg[(x <= lower + 1e-14) & (g > 0)] = 0.0
    if upper is not None:
        pg[(x >= upper - 1e-14) & (g < 0)] = 0.0
    return pg


def minimize(
    problem: OptimProblem,
    max_iterations: int = 200,
    energy_tol: float = 1e-8,
    gradient_tol: float = 1e-10,
    damping_init: float = 1e-3,
) -> tuple[np.ndarray, OptimReport]:
    """Levenberg-Marquardt with bound projection.

    Terminates on relative energy change < energy_tol across an accepted
    step, projected gradient infinity-norm < gradient_tol, or the iteration
    cap. Energy over accepted steps is monotonically non-increasing.
    Raises NonFiniteResidual if the callback produces NaN or Inf.
    """

    def feasible(x):
        x = _clip(x, problem.lower, problem.upper)
        if problem.project is not None:
            x = problem.project(x)
        return x

    x = feasible(np.asarray(problem.x0, dtype=float).copy())
    r, J = problem.residual_jac(x)
    if not (np.all(np.isfinite(r)) and np.all(np.isfinite(J))):
        raise NonFiniteResidual("residual callback returned NaN/Inf at start")
    energy = float(r @ r)
    initial_energy = energy

    JtJ = J.T @ J
    diag = np.diag(JtJ).copy()
    lam = damping_init * float(diag.max()) if diag.size else 0.0
    nu = 2.0
    converged = False
    iterations = 0

    for _ in range(max_iterations):
        iterations += 1
        g = J.T @ r
        pg = _projected_gradient(g, x, problem.lower, problem.upper)
        if np.max(np.abs(pg), initial=0.0) < gradient_tol:
            converged = True
            iterations -= 1
            break
        D = np.maximum(diag, 1e-12 * max(diag.max(), 1.0) if diag.size else 1.0)
        try:
            step = np.linalg.solve(JtJ + lam * np.diag(D), -g)
        except np.linalg.LinAlgError:
            lam = max(lam, 1e-12) * nu
            nu *= 2.0
            continue
        x_new = feasible(x + step)
        r_new, J_new = problem.residual_jac(x_new)
        if not (np.all(np.isfinite(r_new)) and np.all(np.isfinite(J_new))):
            raise NonFiniteResidual("residual callback returned NaN/Inf")
        energy_new = float(r_new @ r_new)
        if energy_new < energy:
            actual = energy - energy_new
            predicted = float(step @ (lam * D * step - g))
            rho = actual / predicted if predicted > 0 else 1.0
            lam *= max(1.0 / 3.0, 1.0 - (2.0 * rho - 1.0) ** 3)
            nu = 2.0
            x, r, J = x_new, r_new, J_new
            JtJ = J.T @ J
            diag = np.diag(JtJ).copy()
            small = actual <= energy_tol * max(energy, 1e-300)
            energy = energy_new
            if small:
                converged = True
                break
        else:
            lam = max(lam, 1e-12) * nu
            nu *= 2.0
            if lam > 1e32:
                break

    terms = {
        name: float(r[sl] @ r[sl]) for name, sl in problem.term_slices.items()
    }
    report = OptimReport(
        initial_energy=initial_energy,
        final_energy=energy,
        iterations=iterations,
        converged=converged,
        term_energies=terms,
    )
    return x, report
