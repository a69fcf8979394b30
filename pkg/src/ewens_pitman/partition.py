"""The Ewens-Pitman partition: parameters, counts, the sequential seating
kernel, the simulator, the EPPF and brute-force enumeration for small n."""
from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import _kernels
from .errors import DomainError, ResourceError, StateError

__all__ = [
    "FixedTheta",
    "LinearTheta",
    "ModelParams",
    "PartitionCounts",
    "SeedSpec",
    "Trajectory",
    "transition_probabilities",
    "step",
    "simulate",
    "checkpoint_steps",
    "eppf_log_prob",
    "set_partition_block_sizes",
    "enumerate_exact",
    "MAX_ENUMERATION_N",
]


@dataclass(frozen=True)
class FixedTheta:
    theta: float


@dataclass(frozen=True)
class LinearTheta:
    """theta = lam * n: the array for sample size n stops at h = n."""

    lam: float


@dataclass(frozen=True)
class ModelParams:
    alpha: float
    regime: FixedTheta | LinearTheta
    n: int
    d: int = 1

    def __post_init__(self):
        if not 0.0 <= self.alpha < 1.0:
            raise DomainError(f"alpha must lie in [0, 1), got {self.alpha!r}")
        if isinstance(self.regime, FixedTheta):
            if not self.regime.theta > -self.alpha:
                raise DomainError("fixed theta must exceed -alpha")
        elif isinstance(self.regime, LinearTheta):
            if not self.regime.lam > 0:
                raise DomainError("lambda must be positive")
        else:
            raise DomainError(f"unknown regime {self.regime!r}")
        if self.n < 1:
            raise DomainError("n must be a positive integer")
        if self.d < 1 or self.d > self.n:
            raise DomainError(f"need 1 <= d <= n, got d={self.d}, n={self.n}")

    @classmethod
    def linear(cls, alpha: float, lam: float, n: int, d: int = 1) -> "ModelParams":
        return cls(alpha, LinearTheta(lam), n, d)

    @classmethod
    def fixed(cls, alpha: float, theta: float, n: int, d: int = 1) -> "ModelParams":
        return cls(alpha, FixedTheta(theta), n, d)

    @property
    def theta(self) -> float:
        if isinstance(self.regime, LinearTheta):
            return self.regime.lam * self.n
        return self.regime.theta

    @property
    def is_linear(self) -> bool:
        return isinstance(self.regime, LinearTheta)

    def describe(self) -> dict:
        out = {"alpha": self.alpha, "n": self.n, "d": self.d}
        if self.is_linear:
            out.update(regime="linear", **{"lambda": self.regime.lam})
        else:
            out.update(regime="fixed", theta=self.regime.theta)
        return out


@dataclass
class PartitionCounts:
    """Block counts after ``h`` customers: K_h plus the full size histogram."""

    h: int = 0
    k_total: int = 0
    histogram: dict = field(default_factory=dict)

    def copy(self) -> "PartitionCounts":
        return PartitionCounts(self.h, self.k_total, dict(self.histogram))

    def count(self, r: int) -> int:
        """K_{r,h}; r = 0 is the total number of blocks."""
        if r == 0:
            return self.k_total
        return self.histogram.get(r, 0)

    def truncated(self, d: int) -> np.ndarray:
        return np.array([self.count(r) for r in range(d + 1)], dtype=np.int64)

    def check(self) -> None:
        if any(c < 0 for c in self.histogram.values()):
            raise StateError("negative block count")
        if sum(self.histogram.values()) != self.k_total:
            raise StateError("block counts do not add up to K")
        if sum(r * c for r, c in self.histogram.items()) != self.h:
            raise StateError("block sizes do not add up to h")
        if self.h >= 1 and not 1 <= self.k_total <= self.h:
            raise StateError("K outside 1..h")

    @classmethod
    def from_block_sizes(cls, sizes: Sequence[int]) -> "PartitionCounts":
        hist = Counter(int(s) for s in sizes)
        return cls(sum(sizes), len(sizes), dict(hist))


@dataclass(frozen=True)
class SeedSpec:
    """Seed for one replicate; the stream is a pure function of both fields."""

    master_seed: int
    replicate_index: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.master_seed, spawn_key=(self.replicate_index,))
        return np.random.Generator(np.random.PCG64(ss))

    def uniforms(self, count: int) -> np.ndarray:
        return self.generator().random(count)


def _check_next_step(state: PartitionCounts, params: ModelParams) -> None:
    if state.h < 0:
        raise StateError("negative number of customers")
    if params.is_linear and state.h + 1 > params.n:
        raise StateError(
            f"the array for n={params.n} cannot be extended past h={params.n}"
        )


def transition_probabilities(state: PartitionCounts, params: ModelParams):
    """Probabilities for the next customer.

    Returns ``(p_new, join_weights)`` where ``join_weights[r]`` is the total
    probability of joining some block of size r.
    """
    _check_next_step(state, params)
    if state.h == 0:
        return 1.0, {}
    theta, alpha = params.theta, params.alpha
    denom = theta + state.h
    p_new = (alpha * state.k_total + theta) / denom
    join = {r: (r - alpha) * k / denom for r, k in sorted(state.histogram.items()) if k > 0}
    return p_new, join


def _choose(u: float, state: PartitionCounts, params: ModelParams) -> int:
    # Mirrors the compiled selection rule exactly; 0 means a new block.
    if state.h == 0:
        return 0
    theta, alpha = params.theta, params.alpha
    x = u * (theta + state.h)
    w_new = alpha * state.k_total + theta
    if x < w_new:
        return 0
    target = x - w_new
    s1 = s0 = 0
    last = 0
    for r in sorted(state.histogram):
        k = state.histogram[r]
        if k == 0:
            continue
        last = r
        s1 += r * k
        s0 += k
        if float(s1) - alpha * float(s0) > target:
            return r
    return last


def step(state: PartitionCounts, params: ModelParams, rng) -> tuple[PartitionCounts, np.ndarray]:
    """Seat one customer (reference implementation).

    ``rng`` is a ``numpy.random.Generator`` or any callable returning a
    uniform in [0, 1). Returns the new state and xi = (xi_0, ..., xi_d).
    """
    _check_next_step(state, params)
    u = rng.random() if hasattr(rng, "random") else rng()
    r = _choose(float(u), state, params)
    new = state.copy()
    new.h += 1
    xi = np.zeros(params.d + 1, dtype=np.int64)
    if r == 0:
        new.k_total += 1
        new.histogram[1] = new.histogram.get(1, 0) + 1
        xi[0] = 1
        xi[1] = 1
    else:
        new.histogram[r] -= 1
        if new.histogram[r] == 0:
            del new.histogram[r]
        new.histogram[r + 1] = new.histogram.get(r + 1, 0) + 1
        if r <= params.d:
            xi[r] = -1
        if r + 1 <= params.d:
            xi[r + 1] = 1
    return new, xi


@dataclass
class Trajectory:
    """Truncated count vectors (K, K_1..K_d) recorded at checkpoints."""

    h: np.ndarray
    counts: np.ndarray
    final: PartitionCounts | None = None

    def write_csv(self, path) -> None:
        d = self.counts.shape[1] - 1
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["h", "K"] + [f"K_{r}" for r in range(1, d + 1)])
            for h, row in zip(self.h, self.counts):
                w.writerow([int(h), *(int(v) for v in row)])


def checkpoint_steps(n: int, checkpoints: Sequence[float]) -> np.ndarray:
    """h = floor(x n) for each checkpoint x in (0, 1]."""
    xs = np.asarray(checkpoints, dtype=float)
    if xs.size == 0:
        raise DomainError("need at least one checkpoint")
    if np.any(xs <= 0) or np.any(xs > 1) or np.any(np.diff(xs) < 0):
        raise DomainError("checkpoints must be sorted values in (0, 1]")
    return np.floor(xs * n + 1e-9 * xs).astype(np.int64)


def simulate(params: ModelParams, seed: SeedSpec, checkpoints: Sequence[float] = (1.0,),
             sampler: str = "fenwick", keep_final: bool = False) -> Trajectory:
    """Run the sequential construction up to h = n and record the truncated
    count vector at h = floor(x n) for every checkpoint x."""
    if sampler not in ("fenwick", "scan"):
        raise DomainError(f"unknown sampler {sampler!r}")
    hs = checkpoint_steps(params.n, checkpoints)
    uniforms = seed.uniforms(params.n)
    out, hist = _kernels.crp_path(
        float(params.alpha), float(params.theta), int(params.n), uniforms, hs,
        int(params.d), sampler == "fenwick",
    )
    final = None
    if keep_final:
        sizes = np.nonzero(hist)[0]
        final = PartitionCounts(params.n, int(hist.sum()), {int(r): int(hist[r]) for r in sizes})
    return Trajectory(hs, out, final)


def eppf_log_prob(block_sizes: Sequence[int], params: ModelParams) -> float:
    """Log-probability of one labelled set partition with these block sizes."""
    sizes = [int(s) for s in block_sizes]
    if not sizes or any(s < 1 for s in sizes):
        raise DomainError("need a non-empty list of positive block sizes")
    n, k = sum(sizes), len(sizes)
    theta, alpha = params.theta, params.alpha
    # (theta)_{(k, alpha)} / (theta)_n with the common factor theta cancelled,
    # which keeps every factor positive for theta in (-alpha, 0].
    log_p = math.fsum(math.log(theta + i * alpha) for i in range(1, k))
    log_p -= math.fsum(math.log(theta + i) for i in range(1, n))
    log_p += math.fsum(
        math.log(j - alpha) for s in sizes for j in range(1, s)
    )
    return log_p


MAX_ENUMERATION_N = 10


@lru_cache(maxsize=None)
def set_partition_block_sizes(n: int) -> tuple:
    """Multiset of block-size signatures over all set partitions of [n].

    Iterates every restricted growth string, so the result is a tuple of
    ``(sorted_sizes, multiplicity)`` with multiplicities summing to Bell(n).
    """
    if n > MAX_ENUMERATION_N:
        raise ResourceError(f"enumeration is limited to n <= {MAX_ENUMERATION_N}")
    tally = Counter()
    rgs = [0] * n
    maxes = [0] * n  # maxes[i] = max(rgs[:i+1])
    while True:
        sizes = Counter(rgs)
        tally[tuple(sorted(sizes.values(), reverse=True))] += 1
        # next restricted growth string
        i = n - 1
        while i > 0 and rgs[i] > maxes[i - 1]:
            i -= 1
        if i == 0:
            break
        rgs[i] += 1
        maxes[i] = max(maxes[i - 1], rgs[i])
        for j in range(i + 1, n):
            rgs[j] = 0
            maxes[j] = maxes[i]
    return tuple(sorted(tally.items()))


def enumerate_exact(params: ModelParams) -> dict:
    """Exact joint pmf of (K_n, K_{1,n}, ..., K_{d,n}) by summing the EPPF over
    every set partition of [n]; keys are tuples of length d + 1."""
    n, d = params.n, params.d
    if n > MAX_ENUMERATION_N:
        raise ResourceError(f"enumeration is limited to n <= {MAX_ENUMERATION_N}")
    pmf: dict[tuple, list] = {}
    for sizes, mult in set_partition_block_sizes(n):
        p = mult * math.exp(eppf_log_prob(sizes, params))
        counts = Counter(sizes)
        key = (len(sizes),) + tuple(counts.get(r, 0) for r in range(1, d + 1))
        pmf.setdefault(key, []).append(p)
    return {key: math.fsum(ps) for key, ps in sorted(pmf.items())}
