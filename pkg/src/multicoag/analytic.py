"""Exact subcritical solution via total-progeny probabilities.

For t below the critical time, the solution of the reduced coagulation
system is w_n(t) = (p_i / n_i) * P(T_i = n) for any component i with
n_i > 0, where T_i is the total progeny (by type) of a multi-type Poisson
branching process started from one type-i node.  The progeny probabilities
come out of a power-series inversion as a signed sum over principal minors
of A diag(p) times independent Poisson probabilities:

    P(T_i = n) = sum_I c_I * prod_l Poi(lam_l).pmf(n_l - [l in I] - [l == i])
    c_I = (-t)^{|I|} det( (A diag(p))_{I,I} ),   lam_l = t * (n . A)_l * p_l

Terms are accumulated with exact summation after factoring out the largest
magnitude, so cancellation is tracked and flagged rather than silent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.signal

from .errors import (
    CriticalityError,
    NumericalBreakdownError,
    SpecValidationError,
)
from .model import (
    Composition,
    ModelSpec,
    SizeDistribution,
    as_composition,
    compositions_up_to,
)
from . import pgf

MAX_MINOR_M = 20                 # 2^m coefficient table: refuse beyond this
BREAKDOWN_FLOOR = -1e-10         # signed sums below this signal numerical breakdown
PRECISION_RATIO = 1e-12          # |sum| / max addend below this flags precision loss
SERIES_CAP_MULTI = 30            # dense-table degree limit for m >= 2
SERIES_CAP_SINGLE = 1000         # one-dimensional tables stay cheap far beyond 30


def log_poisson_pmf(lam: float, k: int) -> float:
    """log P(Z = k) for Z ~ Poisson(lam); -inf outside the support.

    lam = 0 is the point mass at zero.
    """
    if not np.isfinite(lam) or lam < 0.0:
        raise SpecValidationError(f"Poisson rate must be finite and >= 0, got {lam!r}")
    k = int(k)
    if k < 0:
        return -math.inf
    if lam == 0.0:
        return 0.0 if k == 0 else -math.inf
    return k * math.log(lam) - lam - math.lgamma(k + 1)


def poisson_rates(spec: ModelSpec, t: float, n) -> np.ndarray:
    """Rates lam_l = t * sum_k n_k A_kl p_l of the factorized Poisson counts."""
    comp = np.asarray(as_composition(n, spec.m), dtype=float)
    return t * (comp @ spec.A) * spec.p


@dataclass(frozen=True)
class MinorTable:
    """All 2^m signed principal-minor coefficients of I - t A diag(p).

    coeffs[mask] = (-t)^popcount(mask) * det((A diag(p))_{I,I}) with I the
    set bits of mask, so that det(I - t diag(r) A diag(p)) = sum_I c_I r^I.
    """

    m: int
    t: float
    coeffs: np.ndarray

    def coefficient(self, subset) -> float:
        mask = 0
        for i in subset:
            if not 0 <= int(i) < self.m:
                raise SpecValidationError(f"subset index {i} out of range")
            mask |= 1 << int(i)
        return float(self.coeffs[mask])


def minor_table(spec: ModelSpec, t: float) -> MinorTable:
    """Principal-minor coefficient table at time t (m <= 20)."""
    if spec.m > MAX_MINOR_M:
        raise SpecValidationError(f"minor table needs 2^m coefficients; m={spec.m} > {MAX_MINOR_M}")
    if not t > 0.0 or not np.isfinite(t):
        raise SpecValidationError("t must be positive and finite")
    return _minor_table_cached(spec, float(t))


@lru_cache(maxsize=128)
def _minor_table_cached(spec: ModelSpec, t: float) -> MinorTable:
    M = spec.A * spec.p[None, :]
    coeffs = np.empty(1 << spec.m)
    for mask in range(1 << spec.m):
        idx = [i for i in range(spec.m) if mask >> i & 1]
        if not idx:
            det = 1.0
        elif len(idx) == 1:
            det = float(M[idx[0], idx[0]])
        else:
            det = float(np.linalg.det(M[np.ix_(idx, idx)]))
        coeffs[mask] = (-t) ** len(idx) * det
    coeffs.flags.writeable = False
    return MinorTable(m=spec.m, t=t, coeffs=coeffs)


@dataclass
class ProgenyValue:
    """One evaluated probability with its log and a cancellation flag."""

    value: float
    log_value: float
    precision_limited: bool


def _require_subcritical(spec: ModelSpec, t: float) -> float:
    tc = pgf.gelation_time(spec).T_c
    if not 0.0 < t < tc:
        raise CriticalityError(f"t={t!r} is not below the critical time T_c = {tc!r}")
    return tc


def progeny_pmf_detail(spec: ModelSpec, t: float, i: int, n) -> ProgenyValue:
    """P(T_i = n) with diagnostics; see progeny_pmf."""
    _require_subcritical(spec, t)
    if not 0 <= int(i) < spec.m:
        raise SpecValidationError(f"root type {i} out of range")
    comp = as_composition(n, spec.m)
    if sum(comp) < 1:
        raise SpecValidationError("need |n| >= 1")
    table = minor_table(spec, t)
    return _signed_poisson_sum(spec, table, t, int(i), comp)


def progeny_pmf(spec: ModelSpec, t: float, i: int, n) -> float:
    """Probability that the total progeny by type of a type-i root equals n."""
    return progeny_pmf_detail(spec, t, i, n).value


def _signed_poisson_sum(spec: ModelSpec, table: MinorTable, t: float, i: int,
                        comp: Composition) -> ProgenyValue:
    lam = t * (np.asarray(comp, dtype=float) @ spec.A) * spec.p
    # each component needs at most the three shifts n_l, n_l - 1, n_l - 2
    logp = [[log_poisson_pmf(lam[l], comp[l] - d) for d in (0, 1, 2)] for l in range(spec.m)]
    signs: list[float] = []
    logmags: list[float] = []
    for mask in range(1 << spec.m):
        c = table.coeffs[mask]
        if c == 0.0:
            continue
        logmag = math.log(abs(c))
        for l in range(spec.m):
            shift = (mask >> l & 1) + (1 if l == i else 0)
            lp = logp[l][shift]
            if lp == -math.inf:
                logmag = -math.inf
                break
            logmag += lp
        if logmag > -math.inf:
            signs.append(math.copysign(1.0, c))
            logmags.append(logmag)
    if not logmags:
        return ProgenyValue(value=0.0, log_value=-math.inf, precision_limited=False)
    peak = max(logmags)
    # scaled addends are in [-1, 1]; fsum makes the reduction exactly rounded
    s = math.fsum(sg * math.exp(lm - peak) for sg, lm in zip(signs, logmags))
    value = math.exp(peak) * s
    if value < BREAKDOWN_FLOOR:
        raise NumericalBreakdownError(
            f"signed minor sum collapsed to {value:.3e} < {BREAKDOWN_FLOOR} at n={comp}"
        )
    flag = abs(s) < PRECISION_RATIO
    if s <= 0.0:
        return ProgenyValue(value=0.0, log_value=-math.inf, precision_limited=flag)
    return ProgenyValue(value=min(value, 1.0), log_value=peak + math.log(s), precision_limited=flag)


def _solve_core(spec: ModelSpec, t: float, n) -> tuple[ProgenyValue, int | None]:
    _require_subcritical(spec, t)
    comp = as_composition(n, spec.m)
    if sum(comp) < 1:
        raise SpecValidationError("need |n| >= 1")
    valid = [i for i in range(spec.m) if comp[i] > 0 and spec.p[i] > 0.0]
    if not valid:
        # n lives entirely on components that start empty: never produced
        return ProgenyValue(value=0.0, log_value=-math.inf, precision_limited=False), None
    root = valid[0]
    pv = progeny_pmf_detail(spec, t, root, comp)
    scale = spec.p[root] / comp[root]
    out = ProgenyValue(
        value=scale * pv.value,
        log_value=math.log(scale) + pv.log_value if pv.value > 0.0 else -math.inf,
        precision_limited=pv.precision_limited,
    )
    if __debug__ and len(valid) > 1:
        for j in valid[1:]:
            other = spec.p[j] / comp[j] * progeny_pmf(spec, t, j, comp)
            assert math.isclose(other, out.value, rel_tol=1e-9, abs_tol=1e-12), (
                f"root-choice mismatch at n={comp}: i={root} gives {out.value!r}, "
                f"i={j} gives {other!r}"
            )
    return out, root


def solve(spec: ModelSpec, t: float, n) -> float:
    """Exact w_n(t) for subcritical t, via the smallest valid root component.

    Under python -O the cross-check over all valid root components is
    skipped; with assertions enabled every valid root is required to give
    the same value.
    """
    return _solve_core(spec, t, n)[0].value


def solve_log(spec: ModelSpec, t: float, n) -> float:
    """log w_n(t); -inf when the composition is unreachable.

    Stays finite far beyond the range where w_n itself underflows, which is
    what large-deviation rate evaluations need.
    """
    return _solve_core(spec, t, n)[0].log_value


def solve_detail(spec: ModelSpec, t: float, n) -> ProgenyValue:
    """w_n(t) with the cancellation flag attached."""
    return _solve_core(spec, t, n)[0]


def solve_window(spec: ModelSpec, t: float, n_max: int) -> SizeDistribution:
    """Evaluate w_n(t) for every composition with 1 <= |n| <= n_max."""
    entries = {comp: solve(spec, t, comp) for comp in compositions_up_to(spec.m, n_max)}
    return SizeDistribution(t=t, m=spec.m, entries=entries)


def series_oracle(spec: ModelSpec, t: float, degree_cap: int,
                  max_table_bytes: int = 64 << 20) -> dict[tuple[int, Composition], float]:
    """Progeny probabilities by brute-force power-series iteration.

    Iterates the implicit transform system g_i = s_i * exp(t sum_l A_il p_l
    (g_l - 1)) as a truncated formal power series in s; after degree_cap
    sweeps every coefficient of total degree <= degree_cap is exact, giving
    P(T_i = n) as the coefficient of s^n.  Deliberately independent of the
    minor-table route so the two can check each other.

    Returns a dict keyed by (root type, composition) covering all
    1 <= |n| <= degree_cap.
    """
    _require_subcritical(spec, t)
    cap = int(degree_cap)
    if cap < 1:
        raise SpecValidationError("degree_cap must be >= 1")
    limit = SERIES_CAP_SINGLE if spec.m == 1 else SERIES_CAP_MULTI
    if cap > limit:
        raise SpecValidationError(f"degree_cap {cap} exceeds the m={spec.m} limit of {limit}")
    table_bytes = 8 * (cap + 1) ** spec.m
    if table_bytes > max_table_bytes:
        raise SpecValidationError(
            f"dense coefficient table would take {table_bytes} bytes > budget {max_table_bytes}"
        )

    m = spec.m
    shape = (cap + 1,) * m
    degree = np.sum(np.indices(shape), axis=0)
    keep = degree <= cap
    trunc = tuple(slice(0, cap + 1) for _ in range(m))

    def mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
        out = scipy.signal.fftconvolve(a, b)[trunc]
        out[~keep] = 0.0
        return out

    def exp_series(s: np.ndarray) -> np.ndarray:
        # s has no constant term, so the Taylor sum terminates at degree cap
        out = np.zeros(shape)
        out[(0,) * m] = 1.0
        power = out.copy()
        for j in range(1, cap + 1):
            power = mul(power, s) / j
            out += power
        return out

    const = np.exp(-t * (spec.A @ spec.p))
    g = [np.zeros(shape) for _ in range(m)]
    for _ in range(cap):
        new = []
        for i in range(m):
            s = np.zeros(shape)
            for l in range(m):
                coef = t * spec.A[i, l] * spec.p[l]
                if coef != 0.0:
                    s = s + coef * g[l]
            e = const[i] * exp_series(s)
            shifted = np.zeros(shape)
            src = [slice(None)] * m
            dst = [slice(None)] * m
            src[i] = slice(0, cap)
            dst[i] = slice(1, cap + 1)
            shifted[tuple(dst)] = e[tuple(src)]
            shifted[~keep] = 0.0
            new.append(shifted)
        g = new

    out: dict[tuple[int, Composition], float] = {}
    for comp in compositions_up_to(m, cap):
        for i in range(m):
            out[(i, comp)] = float(g[i][comp])
    return out
