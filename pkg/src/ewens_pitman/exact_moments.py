"""Exact finite-h moments of K_h and K_{r,h}.

Falling-factorial moments come from gamma-function closed forms. Raw and
central moments are assembled from them with Stirling numbers, except for
the central moments of K_h, which also have a cancellation-free recursion.
"""
from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import CancellationWarning, DomainError
from .partition import ModelParams
from .specfun import (
    DEFAULT_POLICY,
    AccuracyPolicy,
    falling_factorial,
    log_gamma_ratio,
    log_rising_factorial,
    polygamma_shift_diff,
    stirling2,
)

__all__ = [
    "ALPHA_ZERO_CUTOFF",
    "MomentResult",
    "falling_moment_sized",
    "falling_moment_total",
    "falling_moment",
    "raw_moment",
    "central_moment",
    "exact_mean_vector",
    "MomentTable",
    "build_moment_table",
]

# Cancellation ratio beyond which the alternating sum for K_h is replaced by
# the positive forward recursion, for h up to RECURSION_MAX_H.
RECURSION_SWITCH = 10.0
RECURSION_MAX_H = 10**7

# Below this alpha the alpha = 0 formulas are used; the alternating sum for
# alpha > 0 loses roughly log10(1 / alpha) digits as alpha shrinks.
ALPHA_ZERO_CUTOFF = 1e-12

MAX_TOTAL_ORDER = 4


@dataclass(frozen=True)
class MomentResult:
    value: float
    # sum |terms| / |sum terms| of the final signed sum (1.0 when all terms agree in sign)
    cancellation: float = 1.0
    flagged: bool = False


def _check_query(h: int, params: ModelParams) -> None:
    if h < 1:
        raise DomainError("h must be at least 1")
    if params.is_linear and h > params.n:
        raise DomainError(f"h={h} exceeds n={params.n}")


def _signed_sum(terms, policy: AccuracyPolicy) -> MomentResult:
    terms = sorted(terms, key=abs, reverse=True)
    total = math.fsum(terms)
    size = math.fsum(abs(t) for t in terms)
    if size == 0.0:
        return MomentResult(0.0)
    ratio = math.inf if total == 0.0 else size / abs(total)
    return MomentResult(total, ratio, ratio > policy.cancellation_limit)


def _report(res: MomentResult, what: str) -> MomentResult:
    if res.flagged:
        warnings.warn(
            f"{what}: signed sum lost about {math.log10(res.cancellation):.1f} digits",
            CancellationWarning,
            stacklevel=3,
        )
    return res


def _sized(r: int, s: int, h: int, params: ModelParams) -> MomentResult:
    if s == 0:
        return MomentResult(1.0)
    if r * s > h:
        return MomentResult(0.0)
    alpha, theta = params.alpha, params.theta
    # log of ((1-alpha)_{r-1} / r!)^s
    log_c = s * (log_rising_factorial(1.0 - alpha, r - 1) - math.lgamma(r + 1))
    log_fall = math.log(falling_factorial(h, r * s))
    # prod_{i=1}^{s-1} (theta + i alpha): alpha^{s-1} Gamma(theta/alpha + s) / Gamma(theta/alpha + 1)
    log_prod = log_rising_factorial(theta + alpha, s - 1, alpha)
    # Gamma(theta+1)/Gamma(theta+h) * Gamma(theta+s alpha+h-rs)/Gamma(theta+s alpha),
    # regrouped so that each ratio has a small offset.
    log_g = log_gamma_ratio(theta + h, s * alpha - r * s, 0.0)
    log_g += log_gamma_ratio(theta, 1.0, s * alpha)
    return MomentResult(math.exp(log_c + log_fall + log_prod + log_g))


def _total_alpha_zero(s: int, h: int, theta: float) -> MomentResult:
    # Log-derivatives of E[t^K] = (theta t)_h / (theta)_h at t = 1 are
    # theta^i Phi_{i-1}; falling moments are their complete Bell polynomials.
    l1, l2, l3, l4 = (
        theta ** (i + 1) * polygamma_shift_diff(i, theta, h) for i in range(4)
    )
    if s == 1:
        terms = [l1]
    elif s == 2:
        terms = [l1 * l1, l2]
    elif s == 3:
        terms = [l1**3, 3 * l1 * l2, l3]
    else:
        terms = [l1**4, 6 * l1 * l1 * l2, 3 * l2 * l2, 4 * l1 * l3, l4]
    return _signed_sum(terms, DEFAULT_POLICY)


def _total_alpha_positive(s: int, h: int, theta: float, alpha: float,
                          policy: AccuracyPolicy) -> MomentResult:
    # (theta/alpha)_s sum_i (-1)^{s-i} C(s,i) (theta+i alpha)_h / (theta)_h.
    # theta Gamma(theta) = Gamma(theta + 1) keeps every argument positive for
    # theta in (-alpha, 0].
    log_front = log_rising_factorial(theta / alpha + 1.0, s - 1) - math.log(alpha)
    terms = []
    for i in range(s + 1):
        sign = -1.0 if (s - i) % 2 else 1.0
        if i == 0:
            # Gamma(theta + 1) / Gamma(theta) = theta, possibly zero or negative
            terms.append(sign * math.comb(s, 0) * theta * math.exp(log_front))
            continue
        log_r = log_gamma_ratio(theta + h, i * alpha, 0.0) + log_gamma_ratio(theta, 1.0, i * alpha)
        terms.append(sign * math.comb(s, i) * math.exp(log_front + log_r))
    return _signed_sum(terms, policy)


def _total(s: int, h: int, params: ModelParams, policy: AccuracyPolicy) -> MomentResult:
    if s == 0:
        return MomentResult(1.0)
    if s > MAX_TOTAL_ORDER:
        raise DomainError(f"falling moments of K_h are available up to order {MAX_TOTAL_ORDER}")
    if s > h:
        return MomentResult(0.0)
    alpha, theta = params.alpha, params.theta
    if alpha < ALPHA_ZERO_CUTOFF:
        if theta <= 0:
            raise DomainError("alpha = 0 needs theta > 0")
        return _total_alpha_zero(s, h, theta)
    res = _total_alpha_positive(s, h, theta, alpha, policy)
    if res.cancellation > RECURSION_SWITCH and h <= RECURSION_MAX_H:
        value = _kernels.total_count_falling_moments(alpha, theta, h, s)[s]
        return MomentResult(value, res.cancellation, False)
    # The exact value is non-negative; a tiny negative is rounding.
    return MomentResult(max(res.value, 0.0), res.cancellation, res.flagged)


def falling_moment(r: int, s: int, h: int, params: ModelParams,
                   policy: AccuracyPolicy = DEFAULT_POLICY) -> MomentResult:
    """E[(K_{r,h})_{s}] with diagnostics; r = 0 is the total count K_h."""
    _check_query(h, params)
    if r < 0 or s < 0:
        raise DomainError("r and s must be non-negative")
    res = _total(s, h, params, policy) if r == 0 else _sized(r, s, h, params)
    return _report(res, f"E[(K_{r},{h})_{s}]")


def falling_moment_sized(r: int, s: int, h: int, params: ModelParams) -> float:
    """E[(K_{r,h})_{s}] for r >= 1; exactly 0 when r*s > h."""
    if r < 1:
        raise DomainError("block size r must be at least 1")
    return falling_moment(r, s, h, params).value


def falling_moment_total(s: int, h: int, params: ModelParams,
                         policy: AccuracyPolicy = DEFAULT_POLICY) -> float:
    """E[(K_h)_{s}] for s <= 4; warns with CancellationWarning if digits were lost."""
    return falling_moment(0, s, h, params, policy).value


def raw_moment(r: int, k: int, h: int, params: ModelParams) -> MomentResult:
    """E[K_{r,h}^k] = sum_s S(k, s) E[(K_{r,h})_s]."""
    terms = [stirling2(k, s) * falling_moment(r, s, h, params).value for s in range(1, k + 1)]
    return MomentResult(math.fsum(terms)) if k else MomentResult(1.0)


def central_moment(r: int, j: int, h: int, params: ModelParams, method: str = "auto",
                   policy: AccuracyPolicy = DEFAULT_POLICY) -> float:
    """E[(K_{r,h} - E K_{r,h})^j] for j in {2, 3, 4}.

    ``method="stirling"`` expands in raw moments. ``"recursion"`` (r = 0 only)
    propagates the central moments directly and stays accurate for large h,
    where the expansion subtracts numbers of size E[K]^j. ``"auto"`` picks
    the recursion for r = 0 and the expansion otherwise.
    """
    _check_query(h, params)
    if j not in (2, 3, 4):
        raise DomainError("central moments are available for j in {2, 3, 4}")
    if method == "auto":
        method = "recursion" if r == 0 else "stirling"
    if method == "recursion":
        if r != 0:
            raise DomainError("the recursion covers the total count only")
        _, m2, m3, m4 = _kernels.total_count_central_moments(params.alpha, params.theta, h)
        return {2: m2, 3: m3, 4: m4}[j]
    if method != "stirling":
        raise DomainError(f"unknown method {method!r}")
    mean = falling_moment(r, 1, h, params).value
    terms = []
    for k in range(j + 1):
        raw = raw_moment(r, k, h, params).value
        terms.append(math.comb(j, k) * (-mean) ** (j - k) * raw)
    res = _report(_signed_sum(terms, policy), f"central moment {j} of K_{r},{h}")
    return res.value


def exact_mean_vector(h: int, params: ModelParams) -> np.ndarray:
    """(E K_h, E K_{1,h}, ..., E K_{d,h})."""
    return np.array([falling_moment(r, 1, h, params).value for r in range(params.d + 1)])


@dataclass
class MomentTable:
    """Falling moments keyed by (r, s, h), with a cancellation flag per entry."""

    params: ModelParams
    values: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)

    def add(self, r: int, s: int, h: int) -> float:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", CancellationWarning)
            res = falling_moment(r, s, h, self.params)
        self.values[(r, s, h)] = float(res.value)
        self.flags[(r, s, h)] = res.flagged
        return res.value

    def __getitem__(self, key) -> float:
        return self.values[key]

    @property
    def log_space_cancellation_warning(self) -> bool:
        return any(self.flags.values())

    def rows(self):
        for (r, s, h), v in sorted(self.values.items()):
            yield {"r": r, "s": s, "h": h, "value": v, "flag": int(self.flags[(r, s, h)])}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=["r", "s", "h", "value", "flag"], lineterminator="\n")
        w.writeheader()
        for row in self.rows():
            w.writerow({**row, "value": repr(row["value"])})
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(
            {"params": self.params.describe(), "moments": list(self.rows())}, indent=2
        )


def build_moment_table(params: ModelParams, orders=(1, 2, 3, 4), hs=None) -> MomentTable:
    table = MomentTable(params)
    hs = [params.n] if hs is None else hs
    for h in hs:
        for r in range(params.d + 1):
            for s in orders:
                table.add(r, s, h)
    return table
