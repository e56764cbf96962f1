"""Model data types: kernel matrix instances and sparse cluster-size distributions.

A model instance is the pair (A, p): a symmetric nonnegative m x m matrix A
defining the bilinear merge kernel K(k, l) = k . A l on integer composition
vectors, and a probability vector p of initial monomer masses per component.
Cluster-size distributions are sparse maps from compositions to masses.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Iterator

import numpy as np

from .errors import CriticalityError, SpecValidationError

# A composition is an immutable vector of per-component monomer counts.
Composition = tuple[int, ...]

P_SUM_EXACT_TOL = 1e-12   # |sum(p) - 1| below this: accepted verbatim
P_SUM_RENORM_TOL = 1e-6   # below this: renormalized with a warning; above: rejected
MASS_FLOOR = 1e-300       # entries below this are dropped when pruning


def as_composition(n: Iterable[int], m: int | None = None) -> Composition:
    """Coerce to a tuple of nonnegative ints, optionally checking the length."""
    out = []
    for v in n:
        iv = int(v)
        if iv != v or iv < 0:
            raise SpecValidationError(f"composition entries must be nonnegative integers, got {v!r}")
        out.append(iv)
    comp = tuple(out)
    if m is not None and len(comp) != m:
        raise SpecValidationError(f"composition has {len(comp)} components, expected {m}")
    return comp


def composition_size(n: Iterable[int]) -> int:
    """Total monomer count |n|."""
    return int(sum(n))


@lru_cache(maxsize=32)
def compositions_up_to(m: int, n_max: int) -> tuple[Composition, ...]:
    """All compositions with 1 <= |n| <= n_max, in graded lexicographic order."""
    if m < 1 or n_max < 1:
        raise SpecValidationError("need m >= 1 and n_max >= 1")

    def parts(total: int, k: int) -> Iterator[Composition]:
        if k == 1:
            yield (total,)
            return
        for first in range(total, -1, -1):
            for rest in parts(total - first, k - 1):
                yield (first, *rest)

    return tuple(c for total in range(1, n_max + 1) for c in parts(total, m))


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Immutable model instance.

    A is symmetrized to (A + A^T)/2 at construction (flagged), p is
    renormalized when its sum is within 1e-6 of one (flagged, warned).
    Arrays are stored read-only; instances hash by identity.
    """

    m: int
    A: np.ndarray
    p: np.ndarray
    symmetrized: bool = field(init=False, default=False)
    renormalized: bool = field(init=False, default=False)

    def __post_init__(self) -> None:
        A = np.array(self.A, dtype=float)
        p = np.array(self.p, dtype=float)
        m = int(self.m)
        if m < 1:
            raise SpecValidationError("m must be >= 1")
        if A.shape != (m, m):
            raise SpecValidationError(f"A must be {m}x{m}, got shape {A.shape}")
        if p.shape != (m,):
            raise SpecValidationError(f"p must have length {m}, got shape {p.shape}")
        if not np.all(np.isfinite(A)) or not np.all(np.isfinite(p)):
            raise SpecValidationError("A and p must be finite")
        if np.any(A < 0.0):
            raise SpecValidationError("A must be entrywise nonnegative")
        if np.any(p < 0.0):
            raise SpecValidationError("p must be entrywise nonnegative")

        sym = 0.5 * (A + A.T)
        was_asym = bool(np.any(A != sym))
        if np.all(sym == 0.0):
            raise SpecValidationError("A must have at least one positive entry")

        s = float(p.sum())
        renorm = False
        if abs(s - 1.0) > P_SUM_EXACT_TOL:
            if abs(s - 1.0) > P_SUM_RENORM_TOL:
                raise SpecValidationError(f"p must sum to 1 within {P_SUM_RENORM_TOL}, got {s!r}")
            warnings.warn(f"p summed to {s!r}; renormalizing", stacklevel=2)
            p = p / s
            renorm = True

        sym.flags.writeable = False
        p.flags.writeable = False
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "A", sym)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "symmetrized", was_asym)
        object.__setattr__(self, "renormalized", renorm)

    @property
    def support(self) -> tuple[int, ...]:
        """Component indices with p_i > 0."""
        return tuple(int(i) for i in np.flatnonzero(self.p > 0.0))

    def to_json_dict(self) -> dict:
        return {"m": self.m, "A": self.A.tolist(), "p": self.p.tolist()}

    @classmethod
    def from_json_dict(cls, d: dict) -> "ModelSpec":
        try:
            return cls(m=int(d["m"]), A=d["A"], p=d["p"])
        except KeyError as e:
            raise SpecValidationError(f"spec JSON missing key {e}") from e

    def to_json(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_json_dict(), f, indent=2, sort_keys=True)
            f.write("\n")

    @classmethod
    def from_json(cls, path: str) -> "ModelSpec":
        with open(path, encoding="utf-8") as f:
            return cls.from_json_dict(json.load(f))

    def spec_hash(self) -> str:
        """sha256 of the canonical JSON form, for run manifests."""
        canon = json.dumps(self.to_json_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


@dataclass
class ValidationReport:
    m: int
    symmetrized: bool
    renormalized: bool
    zero_p: list[int]
    irreducible: bool
    blocks: list[list[int]]
    messages: list[str]

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "symmetrized": self.symmetrized,
            "renormalized": self.renormalized,
            "zero_p": self.zero_p,
            "irreducible": self.irreducible,
            "blocks": self.blocks,
            "messages": self.messages,
        }


def validate(spec: ModelSpec) -> ValidationReport:
    """Report structural facts about an already-constructed instance.

    Hard failures (negative entries, bad normalization, zero kernel) are
    raised by the ModelSpec constructor; this never rejects reducibility,
    it only flags it.
    """
    support = list(spec.support)
    zero_p = [i for i in range(spec.m) if i not in support]
    blocks = _support_blocks(spec.A, support)
    irreducible = len(blocks) <= 1
    messages = []
    if spec.symmetrized:
        messages.append("A was symmetrized to (A + A^T)/2")
    if spec.renormalized:
        messages.append("p was renormalized to sum to 1")
    if zero_p:
        messages.append(f"components with p_i = 0: {zero_p} (never populated)")
    if not irreducible:
        messages.append(
            f"support graph of A splits into blocks {blocks}; "
            "each block gels at its own critical time"
        )
    return ValidationReport(
        m=spec.m,
        symmetrized=spec.symmetrized,
        renormalized=spec.renormalized,
        zero_p=zero_p,
        irreducible=irreducible,
        blocks=blocks,
        messages=messages,
    )


def _support_blocks(A: np.ndarray, support: list[int]) -> list[list[int]]:
    """Connected components of the A > 0 graph restricted to the support."""
    remaining = set(support)
    blocks: list[list[int]] = []
    while remaining:
        seed = min(remaining)
        seen = {seed}
        stack = [seed]
        while stack:
            i = stack.pop()
            for j in remaining - seen:
                if A[i, j] > 0.0:
                    seen.add(j)
                    stack.append(j)
        blocks.append(sorted(seen))
        remaining -= seen
    return blocks


def kernel(spec: ModelSpec, k: Iterable[int], l: Iterable[int]) -> float:
    """Merge rate K(k, l) = k . A l for two compositions."""
    ka = np.asarray(as_composition(k, spec.m), dtype=float)
    la = np.asarray(as_composition(l, spec.m), dtype=float)
    return float(ka @ spec.A @ la)


@dataclass
class SizeDistribution:
    """Sparse cluster-size distribution at a fixed time.

    entries maps compositions (|n| >= 1) to nonnegative masses w_n.
    """

    t: float
    m: int
    entries: dict[Composition, float]

    def __post_init__(self) -> None:
        clean: dict[Composition, float] = {}
        for n, w in self.entries.items():
            comp = as_composition(n, self.m)
            if composition_size(comp) < 1:
                raise SpecValidationError("distribution entries need |n| >= 1")
            clean[comp] = float(w)
        self.entries = clean

    @classmethod
    def monodisperse(cls, spec: ModelSpec) -> "SizeDistribution":
        """Initial condition: w at the unit vector e_i equals p_i."""
        entries: dict[Composition, float] = {}
        for i in spec.support:
            e = [0] * spec.m
            e[i] = 1
            entries[tuple(e)] = float(spec.p[i])
        return cls(t=0.0, m=spec.m, entries=entries)

    def prune(self, floor: float = MASS_FLOOR) -> "SizeDistribution":
        """Drop entries with |w| below the floor (default 1e-300)."""
        return SizeDistribution(
            t=self.t, m=self.m,
            entries={n: w for n, w in self.entries.items() if abs(w) >= floor},
        )

    def to_csv(self, path: str) -> None:
        write_distribution_csv(path, self.m, sorted_items(self.entries))

    @classmethod
    def from_csv(cls, path: str, t: float = 0.0) -> "SizeDistribution":
        with open(path, newline="", encoding="utf-8") as f:
            reader = csv.reader(f)
            header = next(reader)
            if header[-1] != "w" or any(h != f"n_{i+1}" for i, h in enumerate(header[:-1])):
                raise SpecValidationError(f"unexpected CSV header {header!r}")
            m = len(header) - 1
            entries = {}
            for row in reader:
                entries[tuple(int(v) for v in row[:-1])] = float(row[-1])
        return cls(t=t, m=m, entries=entries)

    def to_json_dict(self) -> dict:
        return {
            "t": self.t,
            "m": self.m,
            "entries": [{"n": list(n), "w": w} for n, w in sorted_items(self.entries)],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "SizeDistribution":
        return cls(
            t=float(d["t"]), m=int(d["m"]),
            entries={tuple(e["n"]): float(e["w"]) for e in d["entries"]},
        )


def sorted_items(entries: dict[Composition, float]) -> list[tuple[Composition, float]]:
    """Deterministic graded-lexicographic ordering for serialization."""
    return sorted(entries.items(), key=lambda kv: (composition_size(kv[0]), tuple(-c for c in kv[0])))


def write_distribution_csv(path: str, m: int, rows: Iterable[tuple[Composition, float]],
                           value_headers: tuple[str, ...] = ("w",)) -> None:
    """CSV with header n_1,...,n_m,<values>; floats at 17 significant digits."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow([f"n_{i+1}" for i in range(m)] + list(value_headers))
        for n, w in rows:
            vals = w if isinstance(w, tuple) else (w,)
            writer.writerow([*n, *(f"{v:.17g}" for v in vals)])


def mass_vector(dist: SizeDistribution) -> np.ndarray:
    """Per-component mass sum_n n * w_n."""
    out = np.zeros(dist.m)
    for n, w in dist.entries.items():
        out += np.asarray(n, dtype=float) * w
    return out


def borel_oracle(t: float, n: int) -> float:
    """Closed-form single-component solution w_n(t) = n^(n-2) t^(n-1) e^(-nt) / n!.

    Valid for 0 < t < 1 (the single-component critical time); evaluated in
    the log domain so large n does not overflow.
    """
    if not 0.0 < t < 1.0:
        raise CriticalityError(f"closed form requires 0 < t < 1, got t={t!r}")
    n = int(n)
    if n < 1:
        raise SpecValidationError("n must be >= 1")
    return math.exp((n - 2) * math.log(n) + (n - 1) * math.log(t) - n * t - math.lgamma(n + 1))


def random_sparse_distribution(rng: np.random.Generator, m: int, n_max: int,
                               k_entries: int = 8) -> SizeDistribution:
    """Random sparse distribution for property tests (not part of the model API)."""
    comps = compositions_up_to(m, n_max)
    idx = rng.choice(len(comps), size=min(k_entries, len(comps)), replace=False)
    return SizeDistribution(
        t=0.0, m=m, entries={comps[i]: float(rng.uniform(0.0, 0.5)) for i in idx},
    )
