"""Compensated vector martingale of the block counts and its increasing process.

For the count vector K_h = (K_h, K_{1,h}, ..., K_{d,h}) the deterministic
weights a_{r,h} and the predictable sums A_{r,h} make
M_h = a_h * K_h - A_h a martingale. The increasing process sums the exact
conditional covariances of its increments.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .asymptotics import f_ij, gamma_matrix_quadrature
from .errors import DomainError, StateError
from .partition import ModelParams, PartitionCounts, SeedSpec, checkpoint_steps

__all__ = [
    "IDENTITY_TOL",
    "MartingaleState",
    "step_probabilities",
    "a_coefficients",
    "conditional_increment_cov",
    "advance",
    "MartingaleRun",
    "run_martingale",
    "LimitCheckReport",
    "increasing_process_limit_check",
]

IDENTITY_TOL = 1e-10


def _check_weights(params: ModelParams) -> None:
    # a_{r,h} needs theta + k - r + alpha > 0 for every k >= 1 and r <= d
    if params.theta + 1.0 - params.d + params.alpha <= 0:
        raise DomainError("the compensator weights need theta + 1 + alpha > d")


def step_probabilities(state: PartitionCounts, params: ModelParams):
    """(p_r, q_r) for r = 0..d at a state: the chance that K_r goes up and down."""
    d, h = params.d, state.h
    p = np.zeros(d + 1)
    q = np.zeros(d + 1)
    if h == 0:
        p[0] = p[1] = 1.0
        return p, q
    denom = params.theta + h
    alpha = params.alpha
    p[0] = p[1] = (alpha * state.k_total + params.theta) / denom
    for r in range(1, d + 1):
        if r >= 2:
            p[r] = (r - 1 - alpha) * state.count(r - 1) / denom
        q[r] = (r - alpha) * state.count(r) / denom
    return p, q


def a_coefficients(h: int, params: ModelParams) -> np.ndarray:
    """a_{r,h} = prod_{k=1}^{h-1} (theta + k) / (theta + k - r + alpha), r = 0..d."""
    _check_weights(params)
    if h < 1:
        raise DomainError("a is defined for h >= 1")
    k = params.theta + np.arange(1, h, dtype=float)
    r = np.arange(params.d + 1, dtype=float)
    if k.size == 0:
        return np.ones(params.d + 1)
    shift = r[:, None] - params.alpha
    return np.exp(-np.log1p(-shift / k[None, :]).sum(axis=1))


def _cov_from(a: np.ndarray, p: np.ndarray, q: np.ndarray) -> np.ndarray:
    m = a.size
    out = np.empty((m, m))
    _kernels._conditional_cov(a, p, q, m - 1, out)
    return out


def conditional_increment_cov(state: PartitionCounts, params: ModelParams) -> np.ndarray:
    """E[Delta Delta^T | state] for the step that seats customer state.h + 1."""
    p, q = step_probabilities(state, params)
    return _cov_from(a_coefficients(state.h + 1, params), p, q)


@dataclass
class MartingaleState:
    h: int
    a: np.ndarray
    A: np.ndarray
    M: np.ndarray
    increasing_process: np.ndarray
    K: np.ndarray

    @classmethod
    def empty(cls, d: int) -> "MartingaleState":
        m = d + 1
        return cls(0, np.ones(m), np.zeros(m), np.zeros(m), np.zeros((m, m)), np.zeros(m))

    def identity_error(self) -> float:
        direct = self.a * self.K - self.A
        scale = np.maximum(1.0, np.maximum(np.abs(self.a * self.K), np.abs(self.A)))
        return float(np.max(np.abs(self.M - direct) / scale))


def advance(state: MartingaleState, partition_state: PartitionCounts, params: ModelParams,
            xi: np.ndarray, check: bool = True) -> MartingaleState:
    """Fold one seating step into the martingale.

    ``partition_state`` is the state before the step and ``xi`` the realised
    change of (K, K_1, ..., K_d).
    """
    if partition_state.h != state.h:
        raise StateError(f"martingale at h={state.h} but partition at h={partition_state.h}")
    xi = np.asarray(xi, dtype=float)
    if state.h == 0:
        # the first customer opens a block; a = 1 and A = 0
        new = MartingaleState.empty(params.d)
        new.h, new.K, new.M = 1, xi.copy(), xi.copy()
        return new
    _check_weights(params)
    h, alpha, theta = state.h, params.alpha, params.theta
    denom = theta + h
    r = np.arange(params.d + 1)
    a = state.a * denom / (denom - r + alpha)
    p, q = step_probabilities(partition_state, params)
    beta = p.copy()
    beta[0] = theta / denom
    new = MartingaleState(
        h=h + 1,
        a=a,
        A=state.A + a * beta,
        M=state.M + a * (xi - (p - q)),
        increasing_process=state.increasing_process + _cov_from(a, p, q),
        K=state.K + xi,
    )
    if check:
        err = new.identity_error()
        if err > IDENTITY_TOL:
            raise StateError(f"M differs from a*K - A by {err:.3g} (relative) at h={new.h}")
    return new


@dataclass
class MartingaleRun:
    """One simulated trajectory of the martingale up to h = n."""

    params: ModelParams
    seed: SeedSpec
    increasing_process: np.ndarray
    M: np.ndarray
    a: np.ndarray
    A: np.ndarray
    K: np.ndarray
    max_identity_error: float
    grid_h: np.ndarray
    F: np.ndarray
    running_process: np.ndarray
    delta: np.ndarray
    state_before_delta: np.ndarray

    def normalised_process(self) -> np.ndarray:
        return self.increasing_process / self.params.n

    def rows(self):
        """(h, entry, value) triples: <M>_h / n and F at every grid point."""
        m = self.params.d + 1
        n = self.params.n
        for g, h in enumerate(self.grid_h):
            for i in range(m):
                for j in range(i, m):
                    yield int(h), f"increasing_process_{i + 1}{j + 1}/n", float(self.running_process[g, i, j] / n)
                    yield int(h), f"F_{i + 1}{j + 1}", float(self.F[g, i, j])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["h", "entry", "value"])
        for h, entry, value in self.rows():
            w.writerow([h, entry, repr(value)])
        return buf.getvalue()


def run_martingale(params: ModelParams, seed: SeedSpec, x_grid: Sequence[float] = (1.0,),
                   delta_at: int = 0, sampler: str = "fenwick") -> MartingaleRun:
    """Simulate one trajectory and carry the martingale along it.

    ``x_grid`` selects h = floor(x n) at which F and the running increasing
    process are recorded; ``delta_at`` (2..n) records Delta_h and K_{h-1}.
    """
    if sampler not in ("fenwick", "scan"):
        raise DomainError(f"unknown sampler {sampler!r}")
    _check_weights(params)
    grid_h = checkpoint_steps(params.n, x_grid)
    out = _kernels.martingale_path(
        float(params.alpha), float(params.theta), int(params.n), seed.uniforms(params.n),
        int(params.d), grid_h, int(delta_at), sampler == "fenwick",
    )
    incproc, mart, a_n, big_a, kvec, max_rel, F, IP, delta, state = out
    return MartingaleRun(params, seed, incproc, mart, a_n, big_a, kvec, float(max_rel),
                         grid_h, F, IP, delta, state)


@dataclass
class LimitCheckReport:
    params: ModelParams
    tolerance: float
    gamma: np.ndarray
    seeds: list = field(default_factory=list)
    max_rel_dev: list = field(default_factory=list)
    rel_dev: list = field(default_factory=list)
    f_sup_distance: list = field(default_factory=list)
    identity_error: list = field(default_factory=list)

    @property
    def passes(self) -> list:
        return [dev <= self.tolerance for dev in self.max_rel_dev]

    @property
    def n_pass(self) -> int:
        return sum(self.passes)

    @property
    def max_identity_error(self) -> float:
        return max(self.identity_error) if self.identity_error else 0.0

    def to_dict(self) -> dict:
        return {
            "params": self.params.describe(),
            "tolerance": self.tolerance,
            "gamma_quadrature": self.gamma.tolist(),
            "seeds": [
                {"master_seed": s.master_seed, "replicate_index": s.replicate_index,
                 "max_relative_deviation": dev, "pass": ok,
                 "relative_deviation": rd.tolist(), "f_sup_distance": fs,
                 "identity_error": ie}
                for s, dev, ok, rd, fs, ie in zip(self.seeds, self.max_rel_dev, self.passes,
                                                   self.rel_dev, self.f_sup_distance,
                                                   self.identity_error)
            ],
            "n_pass": self.n_pass,
            "max_identity_error": self.max_identity_error,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def increasing_process_limit_check(params: ModelParams, seeds: Sequence[SeedSpec],
                                   tolerance: float = 0.02,
                                   x_grid: Sequence[float] = tuple(np.linspace(0.1, 1.0, 10)),
                                   gamma: np.ndarray | None = None) -> LimitCheckReport:
    """Compare <M>_n / n with the quadrature Gamma, seed by seed.

    Also reports, per seed, the sup over the x grid and all entries of
    |F^(n)_ij(x) - f_ij(x)|, the Riemann-sum integrand against its limit.
    """
    if not params.is_linear:
        raise DomainError("the limit check needs theta = lam * n")
    if params.n < 10**4:
        raise DomainError("the limit check needs n >= 10^4")
    alpha, lam, d = params.alpha, params.regime.lam, params.d
    gamma = gamma_matrix_quadrature(d, alpha, lam) if gamma is None else np.asarray(gamma)
    xs = np.asarray(x_grid, dtype=float)
    limit_f = np.array([[[f_ij(i, j, alpha, lam, x) for j in range(1, d + 2)]
                         for i in range(1, d + 2)] for x in xs])
    report = LimitCheckReport(params, tolerance, gamma)
    for seed in seeds:
        run = run_martingale(params, seed, xs)
        rel = np.abs(run.normalised_process() - gamma) / np.maximum(np.abs(gamma), math.ulp(1.0))
        report.seeds.append(seed)
        report.rel_dev.append(rel)
        report.max_rel_dev.append(float(rel.max()))
        report.f_sup_distance.append(float(np.abs(run.F - limit_f).max()))
        report.identity_error.append(run.max_identity_error)
    return report
