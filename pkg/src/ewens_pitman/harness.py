"""Monte Carlo experiments: replicate batches, streaming moments, goodness of
fit for the limit laws, and the report header shared by every output."""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import stats

from . import __version__
from .asymptotics import build_cov_model, m_r, mean_vector
from .errors import ConfigurationError, DomainError
from .partition import ModelParams, SeedSpec, simulate

__all__ = [
    "Tolerances",
    "ExperimentConfig",
    "CovAccumulator",
    "BatchSummary",
    "GofResult",
    "CovCheck",
    "SllnReport",
    "report_header",
    "run_batch",
    "bootstrap_cov_se",
    "clt_test",
    "mahalanobis_test",
    "covariance_check",
    "slln_diagnostic",
]


@dataclass(frozen=True)
class Tolerances:
    ks_coefficient: float = 1.63  # KS passes iff D < ks_coefficient / sqrt(R)
    cov_relative: float = 0.10
    cov_se_multiple: float = 3.0
    bootstrap_resamples: int = 200
    slln_sup: float = 0.02


@dataclass(frozen=True)
class ExperimentConfig:
    params: ModelParams
    replicates: int
    master_seed: int
    checkpoints: tuple = (1.0,)
    output_format: str = "json"
    tolerances: Tolerances = Tolerances()
    sampler: str = "fenwick"
    workers: int = 1

    def __post_init__(self):
        if self.replicates < 1:
            raise ConfigurationError("need at least one replicate")
        xs = tuple(float(x) for x in self.checkpoints)
        if not xs or any(not 0 < x <= 1 for x in xs) or list(xs) != sorted(xs):
            raise ConfigurationError("checkpoints must be sorted values in (0, 1]")
        if xs[-1] != 1.0:
            xs = xs + (1.0,)
        object.__setattr__(self, "checkpoints", xs)
        if self.output_format not in ("csv", "json"):
            raise ConfigurationError("output format is csv or json")
        if self.workers < 1:
            raise ConfigurationError("workers must be positive")

    def describe(self) -> dict:
        return {
            "params": self.params.describe(),
            "replicates": self.replicates,
            "master_seed": self.master_seed,
            "checkpoints": list(self.checkpoints),
            "output_format": self.output_format,
            "tolerances": asdict(self.tolerances),
            "sampler": self.sampler,
        }


def report_header(config: ExperimentConfig | None = None, **extra) -> dict:
    """Header block for every report: version, config echo and master seed."""
    head = {"package": "ewens_pitman", "version": __version__}
    if config is not None:
        head["config"] = config.describe()
        head["master_seed"] = config.master_seed
    head.update(extra)
    return head


class CovAccumulator:
    """One-pass mean and covariance (Welford), mergeable (Chan et al.)."""

    def __init__(self, dim: int):
        self.count = 0
        self.mean = np.zeros(dim)
        self.scatter = np.zeros((dim, dim))

    def push(self, x) -> None:
        x = np.asarray(x, dtype=float)
        self.count += 1
        delta = x - self.mean
        self.mean += delta / self.count
        self.scatter += np.outer(delta, x - self.mean)

    def extend(self, rows) -> "CovAccumulator":
        for x in rows:
            self.push(x)
        return self

    def merge(self, other: "CovAccumulator") -> "CovAccumulator":
        out = CovAccumulator(self.mean.size)
        out.count = self.count + other.count
        if out.count == 0:
            return out
        delta = other.mean - self.mean
        out.mean = self.mean + delta * (other.count / out.count)
        out.scatter = self.scatter + other.scatter + np.outer(delta, delta) * (
            self.count * other.count / out.count)
        return out

    def cov(self) -> np.ndarray:
        if self.count < 2:
            raise ConfigurationError("a covariance needs at least two samples")
        c = self.scatter / (self.count - 1)
        return 0.5 * (c + c.T)


@dataclass
class BatchSummary:
    """R replicates of K_{d,n}.

    ``empirical_mean`` is the mean of the raw counts, ``empirical_cov`` the
    covariance of the scaled vectors (K - n M) / sqrt(n), and
    ``standard_errors`` the standard errors of ``empirical_mean``.
    """

    config: ExperimentConfig
    R: int
    empirical_mean: np.ndarray
    empirical_cov: np.ndarray
    standard_errors: np.ndarray
    scaled_vectors_stored: bool
    scaled: np.ndarray | None = None
    counts: np.ndarray | None = None  # (R, checkpoints, d + 1)

    def to_dict(self) -> dict:
        return {
            "header": report_header(self.config),
            "R": self.R,
            "empirical_mean": self.empirical_mean.tolist(),
            "empirical_cov_scaled": self.empirical_cov.tolist(),
            "standard_errors": self.standard_errors.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_csv(self) -> str:
        """One row per (replicate, checkpoint) with the count vector."""
        if self.counts is None:
            raise ConfigurationError("counts were not kept")
        d = self.config.params.d
        hs = np.floor(np.asarray(self.config.checkpoints) * self.config.params.n + 1e-9).astype(int)
        lines = ["replicate,h,K," + ",".join(f"K_{r}" for r in range(1, d + 1))]
        for i, traj in enumerate(self.counts):
            for h, row in zip(hs, traj):
                lines.append(",".join(str(int(v)) for v in (i, h, *row)))
        return "\n".join(lines) + "\n"


def _one(config: ExperimentConfig, idx: int) -> np.ndarray:
    traj = simulate(config.params, SeedSpec(config.master_seed, idx), config.checkpoints,
                    config.sampler)
    return traj.counts


CHUNK = 64


def run_batch(config: ExperimentConfig, keep_vectors: bool = True) -> BatchSummary:
    """Simulate R independent replicates.

    Replicate i always uses SeedSpec(master_seed, i). Replicates are grouped
    into fixed chunks of consecutive indices and the chunk accumulators are
    merged in index order, so the result does not depend on ``workers``.
    """
    params = config.params
    n, dim = params.n, params.d + 1
    centre = n * mean_vector(params.d, params.alpha, params.regime.lam) if params.is_linear else None

    def chunk(start: int):
        idx = range(start, min(start + CHUNK, config.replicates))
        block = np.stack([_one(config, i) for i in idx])
        final = block[:, -1, :].astype(float)
        acc = CovAccumulator(dim).extend(final)
        return block, acc

    starts = range(0, config.replicates, CHUNK)
    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as pool:
            parts = list(pool.map(chunk, starts))
    else:
        parts = [chunk(s) for s in starts]

    acc = CovAccumulator(dim)
    for _, part in parts:
        acc = acc.merge(part)
    counts = np.concatenate([b for b, _ in parts])
    cov_k = acc.cov() if acc.count >= 2 else np.full((dim, dim), np.nan)
    scaled = None
    if keep_vectors and centre is not None:
        scaled = (counts[:, -1, :] - centre) / math.sqrt(n)
    return BatchSummary(
        config=config,
        R=acc.count,
        empirical_mean=acc.mean.copy(),
        empirical_cov=cov_k / n,
        standard_errors=np.sqrt(np.diag(cov_k) / acc.count),
        scaled_vectors_stored=scaled is not None,
        scaled=scaled,
        counts=counts if keep_vectors else None,
    )


def _require_scaled(batch: BatchSummary) -> np.ndarray:
    if batch.scaled is None:
        raise ConfigurationError("this check needs the scaled vectors of a linear-regime batch")
    return batch.scaled


def _batch(source) -> BatchSummary:
    return source if isinstance(source, BatchSummary) else run_batch(source)


def bootstrap_cov_se(scaled: np.ndarray, resamples: int = 200, seed: int = 0) -> np.ndarray:
    """Nonparametric bootstrap standard error of every covariance entry."""
    scaled = np.asarray(scaled, dtype=float)
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(2**31 - 1,)))
    R = scaled.shape[0]
    draws = np.empty((resamples, scaled.shape[1], scaled.shape[1]))
    for b in range(resamples):
        draws[b] = np.cov(scaled[rng.integers(0, R, R)], rowvar=False)
    return draws.std(axis=0, ddof=1)


@dataclass(frozen=True)
class GofResult:
    statistic_name: str
    statistic_value: float
    sample_size: int
    threshold: float
    p_value: float
    passed: bool
    label: str = ""

    @property
    def pass_(self) -> bool:
        return self.passed


def _ks_result(label, sample, cdf, coef) -> GofResult:
    res = stats.kstest(sample, cdf)
    size = len(sample)
    thr = coef / math.sqrt(size)
    return GofResult("KS", float(res.statistic), size, thr, float(res.pvalue),
                     bool(res.statistic < thr), label)


def _sigma_for(batch: BatchSummary, sigma) -> np.ndarray:
    if sigma is not None:
        return np.asarray(sigma, dtype=float)
    p = batch.config.params
    return build_cov_model(p.d, p.alpha, p.regime.lam, closed_form=False).sigma


def clt_test(source, r: int, sigma=None, shift: float = 0.0) -> GofResult:
    """KS test of (K_{r,n} - n m_r) / sqrt(n Sigma_rr) against N(shift, 1).

    ``source`` is an ExperimentConfig (a batch is run) or a BatchSummary.
    ``sigma`` defaults to the conjugated Sigma of ``build_cov_model``;
    a non-zero ``shift`` gives the negative control.
    """
    batch = _batch(source)
    if batch.R < 500:
        raise ConfigurationError("the CLT check needs R >= 500")
    scaled = _require_scaled(batch)
    sig = _sigma_for(batch, sigma)
    if not 0 <= r < sig.shape[0]:
        raise DomainError(f"component {r} outside 0..{sig.shape[0] - 1}")
    var = sig[r, r]
    if not var > 0:
        raise ConfigurationError(f"Sigma[{r},{r}] = {var} is degenerate")
    z = scaled[:, r] / math.sqrt(var)
    return _ks_result(f"marginal r={r}", z, stats.norm(loc=shift).cdf,
                      batch.config.tolerances.ks_coefficient)


def mahalanobis_test(source, sigma=None) -> GofResult:
    """KS test of z^T Sigma^{-1} z against chi-square with d + 1 degrees of freedom."""
    batch = _batch(source)
    scaled = _require_scaled(batch)
    sig = _sigma_for(batch, sigma)
    try:
        chol = np.linalg.cholesky(sig)
    except np.linalg.LinAlgError as exc:
        raise ConfigurationError("Sigma is not positive definite") from exc
    w = np.linalg.solve(chol, scaled.T)
    d2 = (w * w).sum(axis=0)
    return _ks_result("joint Mahalanobis", d2, stats.chi2(sig.shape[0]).cdf,
                      batch.config.tolerances.ks_coefficient)


@dataclass
class CovCheck:
    empirical: np.ndarray
    target: np.ndarray
    bootstrap_se: np.ndarray
    allowed: np.ndarray

    @property
    def abs_diff(self) -> np.ndarray:
        return np.abs(self.empirical - self.target)

    @property
    def entry_pass(self) -> np.ndarray:
        return self.abs_diff <= self.allowed

    @property
    def passed(self) -> bool:
        return bool(self.entry_pass.all())

    def worst(self) -> tuple:
        ratio = self.abs_diff / self.allowed
        i, j = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
        return int(i), int(j), float(ratio[i, j])

    def to_dict(self) -> dict:
        m = self.target.shape[0]
        return {"entries": [
            {"i": i + 1, "j": j + 1, "empirical": float(self.empirical[i, j]),
             "target": float(self.target[i, j]), "bootstrap_se": float(self.bootstrap_se[i, j]),
             "allowed": float(self.allowed[i, j]), "pass": bool(self.entry_pass[i, j])}
            for i in range(m) for j in range(i, m)], "pass": self.passed}


def covariance_check(source, sigma=None, bootstrap_se: np.ndarray | None = None) -> CovCheck:
    """Every entry of the empirical scaled covariance within
    max(cov_relative * |Sigma|, cov_se_multiple * bootstrap SE) of Sigma."""
    batch = _batch(source)
    scaled = _require_scaled(batch)
    tol = batch.config.tolerances
    target = _sigma_for(batch, sigma)
    if bootstrap_se is None:
        bootstrap_se = bootstrap_cov_se(scaled, tol.bootstrap_resamples, batch.config.master_seed)
    allowed = np.maximum(tol.cov_relative * np.abs(target), tol.cov_se_multiple * bootstrap_se)
    return CovCheck(batch.empirical_cov, target, bootstrap_se, allowed)


@dataclass
class SllnReport:
    alpha: float
    lam: float
    d: int
    seed: SeedSpec
    x_grid: list
    n_grid: list
    sup_dev: np.ndarray  # (len(n_grid), d + 1)
    final_ratio: np.ndarray = field(default=None)  # K_{r,n} / n at x = 1, per n

    def decreasing_pairs(self, r: int) -> int:
        col = self.sup_dev[:, r]
        return int(np.sum(col[1:] < col[:-1]))

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha, "lambda": self.lam, "d": self.d,
            "seed": {"master_seed": self.seed.master_seed, "replicate_index": self.seed.replicate_index},
            "x_grid": list(self.x_grid),
            "rows": [{"n": int(n), "sup_deviation": self.sup_dev[k].tolist()}
                     for k, n in enumerate(self.n_grid)],
        }


def slln_diagnostic(alpha: float, lam: float, d: int, seed: SeedSpec, n_grid: Sequence[int],
                    x_grid: Sequence[float] = tuple(np.linspace(0.1, 1.0, 10))) -> SllnReport:
    """Per n, the sup over the x grid of |K_{r, floor(xn)} / n - m_r(x)| for r = 0..d."""
    n_grid = [int(n) for n in n_grid]
    if any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ConfigurationError("the n grid must be increasing")
    xs = np.asarray(x_grid, dtype=float)
    limits = np.array([m_r(r, alpha, lam, xs) for r in range(d + 1)]).T
    sup = np.empty((len(n_grid), d + 1))
    final = np.empty((len(n_grid), d + 1))
    for k, n in enumerate(n_grid):
        params = ModelParams.linear(alpha, lam, n, d)
        traj = simulate(params, seed, xs)
        sup[k] = np.abs(traj.counts / n - limits).max(axis=0)
        final[k] = traj.counts[-1] / n
    return SllnReport(alpha, lam, d, seed, xs.tolist(), n_grid, sup, final)


def with_replicates(config: ExperimentConfig, replicates: int) -> ExperimentConfig:
    return replace(config, replicates=replicates)
