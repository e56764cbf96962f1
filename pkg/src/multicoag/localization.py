"""Localization of large clusters: rate function over the composition simplex.

The probability of a large cluster of size N and composition direction rho
decays like exp(-N * Gamma(rho)) with

    Gamma(rho) = sum_l [ rho_l ln(rho_l / (t sigma_l)) + t sigma_l ] - 1,
    sigma_l(rho) = sum_k rho_k A_kl p_l,

a convex function whose interior minimizer is the preferred direction of
gelation.  Minimization uses exponentiated-gradient (mirror) descent with
Armijo backtracking, which keeps iterates in the open simplex.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import analytic, pgf
from .errors import (
    ConvergenceError,
    CriticalityError,
    HypothesisError,
    SpecValidationError,
)
from .model import ModelSpec

BOUNDARY_TOL = 1e-14     # iterate this close to the boundary => boundary-minimum flag
ARMIJO_C1 = 1e-4
VALUE_NOISE = 1e-15      # absolute slack so backtracking survives the fp noise floor


def as_simplex_point(rho, m: int, interior: bool = True) -> np.ndarray:
    """Validate and exactly renormalize a point of the probability simplex."""
    r = np.asarray(rho, dtype=float)
    if r.shape != (m,):
        raise SpecValidationError(f"simplex point must have length {m}")
    if not np.all(np.isfinite(r)) or np.any(r < 0.0):
        raise SpecValidationError("simplex point must be finite and nonnegative")
    s = float(r.sum())
    if abs(s - 1.0) > 1e-9:
        raise SpecValidationError(f"simplex point must sum to 1, got {s!r}")
    r = r / s
    if interior and np.any(r <= 0.0):
        raise SpecValidationError("point must lie in the open simplex (all entries > 0)")
    return r


def sigma(spec: ModelSpec, rho) -> np.ndarray:
    """Per-component collision intensities sigma_l = sum_k rho_k A_kl p_l."""
    r = as_simplex_point(rho, spec.m, interior=False)
    return spec.p * (spec.A.T @ r)


def gamma(spec: ModelSpec, t: float, rho) -> float:
    """Rate function value at direction rho (finite for t in (0, T_c])."""
    if not t > 0.0 or not np.isfinite(t):
        raise SpecValidationError("t must be positive and finite")
    r = as_simplex_point(rho, spec.m, interior=False)
    s = sigma(spec, r)
    live = r > 0.0
    if np.any(live & (s <= 0.0)):
        raise HypothesisError("sigma_l = 0 with rho_l > 0: the rate is +inf in this direction")
    val = float(np.sum(t * s) - 1.0)
    val += float(np.sum(r[live] * np.log(r[live] / (t * s[live]))))
    return val


def gamma_gradient(spec: ModelSpec, t: float, rho) -> np.ndarray:
    """Gradient d Gamma / d rho_j = ln(rho_j/(t sigma_j)) + 1 + sum_l (t - rho_l/sigma_l) A_jl p_l."""
    if not t > 0.0 or not np.isfinite(t):
        raise SpecValidationError("t must be positive and finite")
    r = as_simplex_point(rho, spec.m)
    s = sigma(spec, r)
    if np.any(s <= 0.0):
        raise HypothesisError("sigma_l = 0 on an interior point: gradient undefined")
    return np.log(r / (t * s)) + 1.0 + (spec.A * spec.p[None, :]) @ (t - r / s)


@dataclass
class LocalizationResult:
    rho_star: np.ndarray
    gamma_min: float
    grad_norm: float
    iterations: int
    converged: bool
    boundary_minimum: bool

    def to_dict(self) -> dict:
        return {
            "rho_star": self.rho_star.tolist(),
            "gamma_min": self.gamma_min,
            "grad_norm": self.grad_norm,
            "iterations": self.iterations,
            "converged": self.converged,
            "boundary_minimum": self.boundary_minimum,
        }


def minimize_gamma(spec: ModelSpec, t: float, tol: float = 1e-10,
                   max_iter: int = 100_000) -> LocalizationResult:
    """Minimize Gamma over the open simplex by mirror descent from uniform.

    Terminates when the Euclidean norm of the simplex-projected gradient
    drops to tol.  Requires every p_i > 0 and subcritical t; an iterate
    collapsing onto the boundary is reported via the boundary flag, not an
    exception.
    """
    if np.any(spec.p <= 0.0):
        raise HypothesisError("localization requires p_i > 0 for every component")
    tc = pgf.gelation_time(spec).T_c
    if not 0.0 < t < tc:
        raise CriticalityError(f"need 0 < t < T_c = {tc!r}, got t={t!r}")

    if spec.m == 1:
        rho = np.array([1.0])
        return LocalizationResult(rho, gamma(spec, t, rho), 0.0, 0, True, False)

    rho = np.full(spec.m, 1.0 / spec.m)
    value = gamma(spec, t, rho)
    eta = 1.0
    for it in range(1, max_iter + 1):
        grad = gamma_gradient(spec, t, rho)
        proj = grad - grad.mean()
        gnorm = float(np.linalg.norm(proj))
        if gnorm <= tol:
            return LocalizationResult(rho, value, gnorm, it - 1, True, False)
        # local decrease predicted by the mirror geometry
        decrease = float(np.sum(rho * (grad - float(rho @ grad)) ** 2))
        if decrease == 0.0:
            return LocalizationResult(rho, value, gnorm, it - 1, True, False)
        while True:
            z = -eta * proj
            z -= z.max()
            cand = rho * np.exp(z)
            cand /= cand.sum()
            cand_value = gamma(spec, t, cand)
            if cand_value <= value - ARMIJO_C1 * eta * decrease + VALUE_NOISE or eta < 1e-14:
                break
            eta *= 0.5
        rho, value = cand, cand_value
        eta = min(eta * 2.0, 1.0)
        if float(rho.min()) < BOUNDARY_TOL:
            grad = gamma_gradient(spec, t, rho)
            proj = grad - grad.mean()
            return LocalizationResult(rho, value, float(np.linalg.norm(proj)), it, False, True)
    raise ConvergenceError(f"mirror descent did not reach tol={tol} in {max_iter} iterations")


@dataclass
class RateSequence:
    """Finite-size rates -(1/N) ln w at n = N rho, with extrapolation.

    extrapolated fits rate(N) = Gamma + (a ln N + b)/N by least squares over
    all points (needs >= 3); running[i] is the same fit using points up to i.
    """

    points: list[tuple[int, float]]
    extrapolated: float | None
    running: list[float | None]
    precision_limited: list[bool]


def empirical_rate(spec: ModelSpec, t: float, rho, n_list) -> RateSequence:
    """Evaluate the decay rate of w along n = N rho for each N in n_list.

    Every N * rho must be integral (within 1e-9) so the composition is
    exact.  The known O(log N / N) finite-size correction is removed by the
    least-squares fit reported in `extrapolated`.
    """
    if np.any(spec.p <= 0.0):
        raise HypothesisError("rate evaluation requires p_i > 0 for every component")
    tc = pgf.gelation_time(spec).T_c
    if not 0.0 < t < tc:
        raise CriticalityError(f"need 0 < t < T_c = {tc!r}, got t={t!r}")
    r = as_simplex_point(rho, spec.m)
    n_list = [int(n) for n in n_list]
    if not n_list or any(n < 1 for n in n_list):
        raise SpecValidationError("n_list must contain positive integers")

    points: list[tuple[int, float]] = []
    flags: list[bool] = []
    for n_tot in n_list:
        scaled = r * n_tot
        comp = np.rint(scaled)
        if np.any(np.abs(scaled - comp) > 1e-9):
            raise SpecValidationError(f"N * rho is not integral at N={n_tot}: {scaled}")
        detail = analytic.solve_detail(spec, t, tuple(int(v) for v in comp))
        if detail.log_value == -math.inf:
            raise SpecValidationError(f"w vanishes at N={n_tot}; direction unreachable")
        points.append((n_tot, -detail.log_value / n_tot))
        flags.append(detail.precision_limited)

    running: list[float | None] = []
    for k in range(len(points)):
        running.append(_rate_fit(points[: k + 1]))
    return RateSequence(points=points, extrapolated=running[-1], running=running,
                        precision_limited=flags)


def _rate_fit(points: list[tuple[int, float]]) -> float | None:
    if len(points) < 3:
        return None
    ns = np.asarray([p[0] for p in points], dtype=float)
    rs = np.asarray([p[1] for p in points])
    design = np.stack([np.ones_like(ns), np.log(ns) / ns, 1.0 / ns], axis=1)
    coef, *_ = np.linalg.lstsq(design, rs, rcond=None)
    return float(coef[0])
