"""Named end-to-end checks with explicit thresholds, shared by the command
line and the acceptance tests."""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Sequence

from .asymptotics import build_cov_model, expansion_S, gamma_matrix_quadrature, m_r
from .errors import CancellationWarning
from .exact_moments import central_moment, falling_moment
from .harness import (
    ExperimentConfig,
    clt_test,
    covariance_check,
    mahalanobis_test,
    report_header,
    run_batch,
    slln_diagnostic,
)
from .martingale import IDENTITY_TOL, increasing_process_limit_check
from .partition import ModelParams, SeedSpec, eppf_log_prob, set_partition_block_sizes
from .specfun import falling_factorial

__all__ = [
    "DEFAULT_SEED",
    "Check",
    "CheckReport",
    "enumerated_falling_moment",
    "verify_enumeration",
    "verify_variance_oracles",
    "verify_mean_expansion",
    "verify_moments",
    "verify_lln",
    "verify_clt",
    "verify_martingale",
]

DEFAULT_SEED = 20241015


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    threshold: float
    passed: bool
    detail: str = ""


@dataclass
class CheckReport:
    title: str
    checks: list = field(default_factory=list)
    header: dict = field(default_factory=dict)

    def add(self, name: str, value: float, threshold: float, passed: bool | None = None,
            detail: str = "") -> Check:
        ok = value <= threshold if passed is None else passed
        c = Check(name, float(value), float(threshold), bool(ok), detail)
        self.checks.append(c)
        return c

    def extend(self, other: "CheckReport") -> "CheckReport":
        self.checks.extend(other.checks)
        return self

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {"header": self.header, "title": self.title, "pass": self.passed,
                "checks": [asdict(c) for c in self.checks]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_text(self) -> str:
        lines = [f"{self.title}"]
        for c in self.checks:
            lines.append(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: value={c.value:.6g} "
                         f"threshold={c.threshold:.6g}" + (f"  ({c.detail})" if c.detail else ""))
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def enumerated_falling_moment(r: int, s: int, n: int, alpha: float, theta: float) -> float:
    """E[(K_{r,n})_s] by summing the EPPF over every set partition of [n]."""
    params = ModelParams.fixed(alpha, theta, n, 1)
    total = []
    for sizes, mult in set_partition_block_sizes(n):
        count = len(sizes) if r == 0 else sum(1 for b in sizes if b == r)
        if count >= s:
            total.append(mult * math.exp(eppf_log_prob(sizes, params)) * falling_factorial(count, s))
    return math.fsum(total)


def verify_enumeration(n_max: int = 8, alphas=(0.0, 0.3, 0.7), lams=(0.5, 1.0, 2.0),
                       rs=(0, 1, 2, 3), ss=(1, 2, 3, 4), rel_tol: float = 1e-10) -> CheckReport:
    """Closed-form falling moments against brute-force enumeration at theta = lam n."""
    rep = CheckReport("exact moments vs enumeration")
    worst, where = 0.0, ""
    for n in range(1, n_max + 1):
        for alpha in alphas:
            for lam in lams:
                params = ModelParams.linear(alpha, lam, n, 1)
                for r in rs:
                    for s in ss:
                        ref = enumerated_falling_moment(r, s, n, alpha, lam * n)
                        with warnings.catch_warnings():
                            warnings.simplefilter("ignore", CancellationWarning)
                            val = falling_moment(r, s, n, params).value
                        err = abs(val - ref) / abs(ref) if ref else abs(val)
                        if err > worst:
                            worst, where = err, f"n={n} alpha={alpha} lam={lam} r={r} s={s}"
    rep.add("max relative error", worst, rel_tol, detail=f"worst at {where}" if where else "")
    return rep


def verify_variance_oracles(n: int = 10**5) -> CheckReport:
    """Exact variances at alpha = 0, lam = 1 against the limits 3/8 and log 2 - 1/2."""
    rep = CheckReport(f"exact variances at n={n}")
    params = ModelParams.linear(0.0, 1.0, n, 1)
    v1 = central_moment(1, 2, n, params) / n
    v0 = central_moment(0, 2, n, params) / n
    rep.add("|Var(K_1,n)/n - 3/8|", abs(v1 - 0.375), 0.01, detail=f"Var/n={v1:.8f}")
    rep.add("|Var(K_n)/n - (log 2 - 1/2)|", abs(v0 - (math.log(2) - 0.5)), 0.005,
            detail=f"Var/n={v0:.8f}")
    return rep


def verify_mean_expansion() -> CheckReport:
    """E[K_n] - n m_0(1): about 1/4 at alpha = 0 and stable in n at alpha = 0.5."""
    rep = CheckReport("mean expansion of K_n (lam = 1)")

    def residual(alpha, n):
        return falling_moment(0, 1, n, ModelParams.linear(alpha, 1.0, n, 1)).value - n * m_r(0, alpha, 1.0, 1.0)

    res0 = residual(0.0, 10**4)
    rep.add("|E K_n - n log 2 - 1/4| at alpha=0, n=1e4", abs(res0 - 0.25), 0.01,
            detail=f"residual={res0:.8f}, S_1(1)={expansion_S(0, 1, 1.0, 0.0, 1.0):.8f}")
    r3, r4 = residual(0.5, 10**3), residual(0.5, 10**4)
    rel = abs(r4 - r3) / abs(r4)
    rep.add("relative change of the residual from n=1e3 to 1e4 at alpha=0.5", rel, 0.10,
            detail=f"residuals {r3:.8f}, {r4:.8f}; S_1(1)={expansion_S(0, 1, 1.0, 0.5, 1.0):.8f}")
    return rep


def verify_moments() -> CheckReport:
    rep = CheckReport("exact moment checks", header=report_header(check="moments"))
    for part in (verify_enumeration(), verify_variance_oracles(), verify_mean_expansion()):
        rep.extend(part)
    return rep


def verify_lln(alphas: Sequence[float] = (0.0, 0.5), lam: float = 1.0, n: int = 10**6, d: int = 2,
               master_seed: int = DEFAULT_SEED, tol: float = 0.02) -> CheckReport:
    """Single trajectories: sup over a 10-point grid of |K_{r,floor(xn)}/n - m_r(x)|."""
    rep = CheckReport(f"law of large numbers, n={n}",
                      header=report_header(check="lln", master_seed=master_seed))
    for k, alpha in enumerate(alphas):
        diag = slln_diagnostic(alpha, lam, d, SeedSpec(master_seed, k), [n])
        for r in range(d + 1):
            rep.add(f"sup deviation r={r}, alpha={alpha}", diag.sup_dev[0, r], tol)
    return rep


def verify_clt(alphas: Sequence[float] = (0.0, 0.5), lam: float = 1.0, n: int = 10**4, R: int = 2000,
               d: int = 1, master_seed: int = DEFAULT_SEED, sigma: str = "conjugated") -> CheckReport:
    """Marginal KS, joint Mahalanobis KS and entrywise covariance against Sigma.

    ``sigma`` chooses the target: ``"conjugated"`` (Gamma rescaled by the
    limits of a) or ``"linear_response"`` (the drift-corrected covariance).
    """
    rep = CheckReport(f"central limit theorem, n={n}, R={R}, Sigma={sigma}",
                      header=report_header(check="clt", master_seed=master_seed))
    for k, alpha in enumerate(alphas):
        cfg = ExperimentConfig(ModelParams.linear(alpha, lam, n, d), R, master_seed + k)
        batch = run_batch(cfg)
        model = build_cov_model(d, alpha, lam, closed_form=False)
        target = model.sigma if sigma == "conjugated" else model.sigma_linear_response
        for r in (0, 1):
            g = clt_test(batch, r, target)
            rep.add(f"KS marginal r={r}, alpha={alpha}", g.statistic_value, g.threshold,
                    g.passed, f"p={g.p_value:.3g}")
        g = mahalanobis_test(batch, target)
        rep.add(f"KS Mahalanobis vs chi2({d + 1}), alpha={alpha}", g.statistic_value, g.threshold,
                g.passed, f"p={g.p_value:.3g}")
        cc = covariance_check(batch, target)
        for i in range(d + 1):
            for j in range(i, d + 1):
                rep.add(f"covariance ({i + 1},{j + 1}), alpha={alpha}", cc.abs_diff[i, j], cc.allowed[i, j],
                        bool(cc.entry_pass[i, j]),
                        f"empirical={cc.empirical[i, j]:.5f} target={cc.target[i, j]:.5f}")
    return rep


def verify_martingale(alpha: float = 0.0, lam: float = 1.0, n: int = 10**6, d: int = 2,
                      seeds: int = 20, tol: float = 0.02, min_pass: int | None = None,
                      master_seed: int = DEFAULT_SEED) -> CheckReport:
    """<M>_n / n against quadrature Gamma over several seeds, plus the identity M = aK - A.

    By default 90% of the seeds (18 of 20) must pass.
    """
    if min_pass is None:
        min_pass = math.ceil(0.9 * seeds)
    rep = CheckReport(f"increasing process, n={n}, d={d}, {seeds} seeds",
                      header=report_header(check="martingale", master_seed=master_seed))
    params = ModelParams.linear(alpha, lam, n, d)
    gamma = gamma_matrix_quadrature(d, alpha, lam)
    lc = increasing_process_limit_check(params, [SeedSpec(master_seed, i) for i in range(seeds)],
                                        tol, gamma=gamma)
    rep.add(f"seeds with every entry within {tol:.0%} of Gamma", lc.n_pass, min_pass,
            lc.n_pass >= min_pass, f"worst seed deviation {max(lc.max_rel_dev):.4f}")
    rep.add("max relative error of M = aK - A", lc.max_identity_error, IDENTITY_TOL)
    return rep
