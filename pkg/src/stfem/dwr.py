"""Dual-weighted residual error estimation with partition-of-unity localization.

The goal error J(u) - J(u_h) is estimated from enriched primal and adjoint
solutions by

    eta_h,p = rho(u_h)(z2 - z_h),   primal residual weighted by adjoint error,
    eta_h,a = J'(u_h)(u2 - u_h) - A'(u_h)(u2 - u_h, z_h),
    eta_k   = rho(u_h)(z_h),        iteration error, zero at exact solves,

with rho the negative weak residual.  The discretization estimate is
eta_h = (eta_h,p + eta_h,a)/2, split into element contributions eta_i by
multiplying the weights with the indicator function of each element, so the
contributions telescope exactly to eta_h.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .assembly import (assemble_jacobian, assemble_residual,
                       jacobian_form_element_values,
                       residual_form_element_values)
from .problems import ProblemDefinition
from .spaces import FeFunction, FeSpace, inject


@dataclass
class EstimatorBreakdown:
    """Estimator parts, per-element indicators, and efficiency indices."""

    eta_h_p: float
    eta_h_a: float
    eta_h: float
    eta_k: float
    local: np.ndarray
    i_eff_h: Optional[float] = None
    i_eff_p: Optional[float] = None
    i_eff_a: Optional[float] = None

    @property
    def estimate(self) -> float:
        """Estimated goal error, eta_h - eta_k."""
        return self.eta_h - self.eta_k


def enrich(space: FeSpace) -> FeSpace:
    """Degree-raised space on the same mesh; the input space is nested in it."""
    if space.degree != 1:
        raise ValueError("enrichment beyond degree 2 is not supported")
    return FeSpace(space.mesh, 2)


def estimate(prob: ProblemDefinition, goal, u: FeFunction, z: FeFunction,
             u2: FeFunction, z2: FeFunction, order: int = None) -> EstimatorBreakdown:
    """Estimator parts from coarse solutions (u, z) and enriched (u2, z2).

    The coarse functions are injected into the enriched space; all forms are
    evaluated there with one quadrature order, so the iteration part eta_k
    coincides with the converged coarse residual up to solver tolerance.
    """
    space2 = u2.space
    if z2.space is not space2:
        raise ValueError("enriched primal and adjoint spaces differ")
    if u.space.mesh is not space2.mesh:
        raise ValueError("coarse and enriched spaces live on different meshes")
    if order is None:
        order = space2.default_order()

    ut = inject(u, space2)
    zt = inject(z, space2)
    wz = z2.coeffs - zt.coeffs
    wu = u2.coeffs - ut.coeffs

    # global parts via assembled operators
    r2 = assemble_residual(space2, ut, prob, order)
    eta_h_p = -float(r2 @ wz)
    eta_k = -float(r2 @ zt.coeffs)
    K2 = assemble_jacobian(space2, ut, prob, order)
    jp = goal.derivative(space2, ut, FeFunction(space2, wu))
    eta_h_a = jp - float(zt.coeffs @ (K2 @ wu))
    eta_h = 0.5 * (eta_h_p + eta_h_a)

    # element-restricted split of the same forms
    loc_p = -residual_form_element_values(space2, ut, wz, prob, order)
    loc_a = goal.derivative_element_values(space2, ut, wu) \
        - jacobian_form_element_values(space2, ut, wu, zt.coeffs, prob, order)
    local = 0.5 * (loc_p + loc_a)

    return EstimatorBreakdown(eta_h_p=eta_h_p, eta_h_a=eta_h_a, eta_h=eta_h,
                              eta_k=eta_k, local=local)


def efficiency(breakdown: EstimatorBreakdown, j_exact: float,
               j_h: float) -> tuple:
    """Efficiency indices estimator/(true goal error); absent for zero error."""
    err = j_exact - j_h
    if abs(err) < 1e-14:
        return (None, None, None)
    i_h = breakdown.eta_h / err
    i_p = breakdown.eta_h_p / err
    i_a = breakdown.eta_h_a / err
    breakdown.i_eff_h, breakdown.i_eff_p, breakdown.i_eff_a = i_h, i_p, i_a
    return (i_h, i_p, i_a)
