"""Monte Carlo sampling of the multi-type Poisson branching process.

A type-k node spawns an independent Poisson(t * A_kl * p_l) number of
type-l children.  Only generation totals matter for total progeny, so whole
generations are drawn at once: the children of Z_g are Poisson with mean
t * (Z_g A) * p summed over parents.  Replicates are processed in fixed
blocks of 4096 with one RNG stream per block derived from (seed, block), so
results do not depend on how blocks are distributed over worker threads.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import SpecValidationError
from .model import Composition, ModelSpec

BLOCK_SIZE = 4096
RANDOM_ROOT = "random"


@dataclass(frozen=True)
class McConfig:
    replicates: int = 10_000
    population_cap: int = 100_000
    seed: int = 0
    root: int | str = RANDOM_ROOT

    def __post_init__(self) -> None:
        if self.replicates < 1:
            raise SpecValidationError("replicates must be >= 1")
        if self.population_cap < 1:
            raise SpecValidationError("population_cap must be >= 1")


@dataclass(frozen=True)
class ProgenySample:
    """Total progeny counts by type; censored samples are lower bounds."""

    counts: Composition
    censored: bool


@dataclass
class McPmfEstimate:
    """Empirical pmf over uncensored replicates, with binomial standard errors."""

    pmf: dict[Composition, tuple[float, float]]
    censoring_rate: float
    replicates: int
    n_uncensored: int
    n_max: int

    def estimate(self, n: Composition) -> tuple[float, float]:
        return self.pmf.get(tuple(n), (0.0, 0.0))


def _resolve_root(spec: ModelSpec, root: int | str | None, config: McConfig) -> int | str:
    r = config.root if root is None else root
    if r == RANDOM_ROOT:
        return RANDOM_ROOT
    r = int(r)
    if not 0 <= r < spec.m:
        raise SpecValidationError(f"root type {r} out of range")
    return r


def _simulate_block(spec: ModelSpec, t: float, root: int | str, size: int,
                    cap: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """One block of replicates; returns (counts, censored) arrays."""
    m = spec.m
    rate = t * spec.A * spec.p[None, :]  # children means per parent: rate[k, l]
    if root == RANDOM_ROOT:
        roots = rng.choice(m, size=size, p=spec.p)
    else:
        roots = np.full(size, int(root))
    z = np.zeros((size, m), dtype=np.int64)
    z[np.arange(size), roots] = 1
    counts = z.copy()
    total = np.ones(size, dtype=np.int64)
    alive = np.ones(size, dtype=bool)
    censored = np.zeros(size, dtype=bool)
    while alive.any():
        lam = z @ rate
        lam[~alive] = 0.0
        children = rng.poisson(lam)
        born = children.sum(axis=1)
        counts += children
        total += born
        newly = alive & (total > cap)
        censored |= newly
        alive &= (born > 0) & ~newly
        z = children
    return counts, censored


def sample_progeny(spec: ModelSpec, t: float, root: int | str | None = None,
                   config: McConfig = McConfig(replicates=1)) -> ProgenySample:
    """Draw one replicate (uses config.seed directly)."""
    if t < 0.0:
        raise SpecValidationError("t must be >= 0")
    r = _resolve_root(spec, root, config)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=[config.seed, 0]))
    counts, censored = _simulate_block(spec, t, r, 1, config.population_cap, rng)
    return ProgenySample(counts=tuple(int(v) for v in counts[0]), censored=bool(censored[0]))


def sample_progeny_batch(spec: ModelSpec, t: float, root: int | str | None,
                         config: McConfig, threads: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """All replicates as arrays (counts: R x m, censored: R).

    Block b always uses the stream seeded by (seed, b), so the result is a
    pure function of (spec, t, root, config) whatever the thread count.
    """
    if t < 0.0:
        raise SpecValidationError("t must be >= 0")
    r = _resolve_root(spec, root, config)
    n = config.replicates
    sizes = [(b, min(BLOCK_SIZE, n - b * BLOCK_SIZE)) for b in range((n + BLOCK_SIZE - 1) // BLOCK_SIZE)]

    def run(block_and_size: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
        b, size = block_and_size
        rng = np.random.default_rng(np.random.SeedSequence(entropy=[config.seed, b]))
        return _simulate_block(spec, t, r, size, config.population_cap, rng)

    if threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, sizes))
    else:
        parts = [run(bs) for bs in sizes]
    counts = np.concatenate([p[0] for p in parts], axis=0)
    censored = np.concatenate([p[1] for p in parts], axis=0)
    return counts, censored


def estimate_pmf(spec: ModelSpec, t: float, root: int | str | None, config: McConfig,
                 n_max: int, threads: int = 1) -> McPmfEstimate:
    """Empirical total-progeny pmf over compositions with |n| <= n_max.

    Censored replicates are excluded from the pmf and reported via the
    censoring rate (at a generous cap the censored fraction estimates the
    survival probability past the critical time).
    """
    if n_max < 1:
        raise SpecValidationError("n_max must be >= 1")
    counts, censored = sample_progeny_batch(spec, t, root, config, threads=threads)
    keep = ~censored
    n_unc = int(keep.sum())
    pmf: dict[Composition, tuple[float, float]] = {}
    if n_unc > 0:
        kept = counts[keep]
        kept = kept[kept.sum(axis=1) <= n_max]
        uniq, freq = np.unique(kept, axis=0, return_counts=True)
        for row, c in zip(uniq, freq):
            est = c / n_unc
            se = float(np.sqrt(est * (1.0 - est) / n_unc))
            pmf[tuple(int(v) for v in row)] = (float(est), se)
    return McPmfEstimate(
        pmf=pmf,
        censoring_rate=float(censored.mean()),
        replicates=config.replicates,
        n_uncensored=n_unc,
        n_max=n_max,
    )
