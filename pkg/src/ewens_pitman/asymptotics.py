"""Large-n limits for theta = lam * n.

Reference objects are assembled compositionally: the block-count profiles
m_r(x) give the limits of p, q and a, those give the integrands f_ij, and
Gamma is their integral. The hand-simplified closed forms for Gamma, the
f_ij and the related integrals are reproduced separately (the ``printed_*``
functions) so that they can be audited against the compositional values.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad_vec
from scipy.linalg import expm

from .errors import AccuracyError, DomainError
from .specfun import (
    DEFAULT_POLICY,
    AccuracyPolicy,
    hypergeom_H,
    integrate,
    log_rising_factorial,
    rising_factorial,
)

__all__ = [
    "c_coef",
    "block_coef",
    "m_r",
    "LimitProfile",
    "limit_abc",
    "p_limit_closed",
    "q_limit_closed",
    "f_ij",
    "gamma_matrix_quadrature",
    "sigma_matrix",
    "sigma_scaling",
    "drift_matrix",
    "sigma_linear_response",
    "mean_vector",
    "s0_squared",
    "rho",
    "gamma_matrix_closed_form",
    "printed_f_ij",
    "printed_integral_matrix",
    "printed_p_limit",
    "expansion_S",
    "B_check",
    "CovModel",
    "build_cov_model",
]

ALPHA_ZERO = 1e-12


def _check(alpha: float, lam: float) -> None:
    if not 0.0 <= alpha < 1.0:
        raise DomainError("alpha must lie in [0, 1)")
    if not lam > 0:
        raise DomainError("lambda must be positive")


def c_coef(r: int, alpha: float) -> float:
    """c_r = (1 - alpha)_r / r!."""
    if r < 0:
        return 0.0
    return math.exp(log_rising_factorial(1.0 - alpha, r) - math.lgamma(r + 1))


def block_coef(r: int, alpha: float) -> float:
    """(1 - alpha)_{r-1} / r!, the prefactor of m_r for r >= 1."""
    return math.exp(log_rising_factorial(1.0 - alpha, r - 1) - math.lgamma(r + 1))


def m_r(r: int, alpha: float, lam: float, x):
    """Limit of K_{r, floor(xn)} / n; r = 0 is the total block count."""
    _check(alpha, lam)
    x = np.asarray(x, dtype=float)
    if r == 0:
        if alpha < ALPHA_ZERO:
            out = lam * np.log1p(x / lam)
        else:
            out = (lam / alpha) * np.expm1(alpha * np.log1p(x / lam))
    else:
        out = block_coef(r, alpha) * x**r * lam ** (1.0 - alpha) * (x + lam) ** (alpha - r)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class LimitProfile:
    """Limits along x = h / n of a_{r,h+1}, p_{r,h}, q_{r,h} and K_{r,h} / n."""

    alpha: float
    lam: float

    def __post_init__(self):
        _check(self.alpha, self.lam)

    def m(self, r: int, x):
        return m_r(r, self.alpha, self.lam, x)

    def a(self, r: int, x):
        x = np.asarray(x, dtype=float)
        out = (1.0 + x / self.lam) ** (r - self.alpha)
        return out if out.ndim else float(out)

    def p(self, r: int, x):
        x = np.asarray(x, dtype=float)
        if r <= 1:
            out = (self.alpha * self.m(0, x) + self.lam) / (x + self.lam)
        else:
            out = (r - 1 - self.alpha) * self.m(r - 1, x) / (x + self.lam)
        return np.asarray(out) if np.ndim(out) else float(out)

    def q(self, r: int, x):
        x = np.asarray(x, dtype=float)
        if r == 0:
            out = np.zeros_like(x)
        else:
            out = (r - self.alpha) * self.m(r, x) / (x + self.lam)
        return out if np.ndim(out) else float(out)


def limit_abc(r: int, alpha: float, lam: float, x):
    """(a_r(x), p_r(x), q_r(x)) built from the m-functions."""
    prof = LimitProfile(alpha, lam)
    return prof.a(r, x), prof.p(r, x), prof.q(r, x)


def p_limit_closed(r: int, alpha: float, lam: float, x):
    """c_{r-1} x^{r-1} lam^{1-alpha} (x+lam)^{alpha-r} for r >= 1; r = 0 equals r = 1."""
    x = np.asarray(x, dtype=float)
    r = max(r, 1)
    return c_coef(r - 1, alpha) * x ** (r - 1) * lam ** (1 - alpha) * (x + lam) ** (alpha - r)


def q_limit_closed(r: int, alpha: float, lam: float, x):
    x = np.asarray(x, dtype=float)
    if r == 0:
        return np.zeros_like(x)
    return c_coef(r, alpha) * x**r * lam ** (1 - alpha) * (x + lam) ** (alpha - r - 1)


def _p_entry(i: int, j: int) -> str:
    # Conditional second moment of the step increments, 1-based (i <= j).
    if j >= i + 2:
        return "zero"
    if j == i + 1 and i >= 2:
        return "minus_q"
    return "p_plus_q"


def f_ij(i: int, j: int, alpha: float, lam: float, x):
    """Limit integrand a_{i-1} a_{j-1} (P_ij - R_ij) at x, 1-based indices."""
    if i < 1 or j < 1:
        raise DomainError("indices are 1-based")
    if i > j:
        i, j = j, i
    prof = LimitProfile(alpha, lam)
    x = np.asarray(x, dtype=float)
    pi, qi = prof.p(i - 1, x), prof.q(i - 1, x)
    pj, qj = prof.p(j - 1, x), prof.q(j - 1, x)
    kind = _p_entry(i, j)
    if kind == "zero":
        pij = 0.0
    elif kind == "minus_q":
        pij = -qi
    else:
        pij = pi + qi
    out = prof.a(i - 1, x) * prof.a(j - 1, x) * (pij - (pi - qi) * (pj - qj))
    return out if np.ndim(out) else float(out)


def gamma_matrix_quadrature(d: int, alpha: float, lam: float,
                            policy: AccuracyPolicy = DEFAULT_POLICY) -> np.ndarray:
    """Gamma_ij = integral over [0, 1] of f_ij; the reference Gamma."""
    _check(alpha, lam)
    if d < 1:
        raise DomainError("d must be at least 1")
    m = d + 1
    g = np.empty((m, m))
    for i in range(1, m + 1):
        for j in range(i, m + 1):
            try:
                v = integrate(lambda x, i=i, j=j: f_ij(i, j, alpha, lam, x), 0.0, 1.0, policy)
            except AccuracyError as exc:
                raise AccuracyError(f"Gamma[{i},{j}]: {exc}", exc.best_estimate,
                                    exc.error_estimate) from exc
            g[i - 1, j - 1] = g[j - 1, i - 1] = v
    return g


def sigma_scaling(d: int, alpha: float, lam: float, exponent: str = "corrected") -> np.ndarray:
    """Matrix of factors ((lam+1)/lam)^e_ij with e = 2 alpha + 2 - i - j.

    ``exponent="printed"`` gives the sign-flipped i + j - 2 - 2 alpha instead.
    """
    idx = np.arange(1, d + 2)
    e = 2 * alpha + 2 - idx[:, None] - idx[None, :]
    if exponent == "printed":
        e = -e
    elif exponent != "corrected":
        raise DomainError(f"unknown exponent variant {exponent!r}")
    return ((lam + 1.0) / lam) ** e


def sigma_matrix(gamma: np.ndarray, alpha: float, lam: float,
                 exponent: str = "corrected") -> np.ndarray:
    """Limit covariance of (K - n M) / sqrt(n): Gamma conjugated by the inverse
    limit of Diag(a_{r,n})."""
    gamma = np.asarray(gamma, dtype=float)
    if not np.allclose(gamma, gamma.T, rtol=0, atol=1e-12):
        raise DomainError("gamma must be symmetric")
    return sigma_scaling(gamma.shape[0] - 1, alpha, lam, exponent) * gamma


def drift_matrix(d: int, alpha: float) -> np.ndarray:
    """J with E[xi_{h+1} | F_h] ~ J K_h / (theta + h) + const, for (K, K_1..K_d).

    Row 0 and row 1 pick up alpha K from the new-block probability; row r >= 2
    gains (r-1-alpha) K_{r-1} and loses (r-alpha) K_r.
    """
    m = d + 1
    j = np.zeros((m, m))
    j[0, 0] = alpha
    j[1, 0] = alpha
    j[1, 1] = -(1.0 - alpha)
    for r in range(2, m):
        j[r, r - 1] = r - 1 - alpha
        j[r, r] = -(r - alpha)
    return j


def sigma_linear_response(d: int, alpha: float, lam: float,
                          policy: AccuracyPolicy = DEFAULT_POLICY) -> np.ndarray:
    """Limit covariance of (K - n M) / sqrt(n) including the drift coupling.

    The fluctuation V(x) solves V' = B V + V B^T + C with B = J / (lam + x)
    and C the limit conditional covariance of one step, so
    V(1) = int_0^1 G(x) C(x) G(x)^T dx with G(x) = exp(J log((lam+1)/(lam+x))).
    When J is diagonal this reduces to ``sigma_matrix``.
    """
    _check(alpha, lam)
    if d < 1:
        raise DomainError("d must be at least 1")
    jm = drift_matrix(d, alpha)
    prof = LimitProfile(alpha, lam)
    idx = range(1, d + 2)

    def integrand(x):
        a = np.array([prof.a(i - 1, x) for i in idx])
        f = np.array([[f_ij(i, j, alpha, lam, x) for j in idx] for i in idx])
        g = expm(jm * math.log((lam + 1.0) / (lam + x)))
        return g @ (f / np.outer(a, a)) @ g.T

    val, err = quad_vec(integrand, 0.0, 1.0, epsabs=policy.abs_tol, epsrel=policy.rel_tol)
    if err > max(policy.abs_tol, policy.rel_tol * np.abs(val).max()) * 10:
        raise AccuracyError("linear-response covariance did not converge", val, err)
    return 0.5 * (val + val.T)


def mean_vector(d: int, alpha: float, lam: float) -> np.ndarray:
    return np.array([m_r(r, alpha, lam, 1.0) for r in range(d + 1)])


# Closed forms as typeset, kept for auditing only.

def s0_squared(alpha: float, lam: float) -> float:
    if alpha < ALPHA_ZERO:
        return math.log((lam + 1) / lam) - 1 / (lam + 1)
    return (lam / alpha) * ((lam + 1 - alpha) / (lam + 1) - (lam / (lam + 1)) ** alpha)


def rho(r: int, s: int, alpha: float, lam: float, policy: AccuracyPolicy = DEFAULT_POLICY) -> float:
    c = lambda k: c_coef(k, alpha)  # noqa: E731
    H = lambda b, cc: hypergeom_H(b, cc, lam, policy)  # noqa: E731
    return (
        c(r) * c(s) * (lam + 1) ** -4 / (r + s + 1) * H(r + s + 2, r + s + 1)
        - (c(r + 1) * c(s) + c(r) * c(s + 1)) * (lam + 1) ** -3 / (r + s + 2) * H(r + s + 3, r + s + 2)
        + c(r + 1) * c(s + 1) * (lam + 1) ** -2 / (r + s + 3) * H(r + s + 4, r + s + 3)
    )


def _printed_s_sq(i: int, alpha: float, lam: float, policy) -> float:
    # diagonal entry i >= 2
    c = lambda k: c_coef(k, alpha)  # noqa: E731
    H = lambda b, cc: hypergeom_H(b, cc, lam, policy)  # noqa: E731
    bracket = (
        c(i - 2) * (lam + 1) ** (i - 3 - alpha) / (i - 1) * H(i - alpha - 2, i - 1)
        + c(i - 1) * (lam + 1) ** (i - 2 - alpha) / i * H(i - alpha, i)
    )
    return lam ** (alpha + 2 - 2 * i) * bracket - lam ** (3 - 2 * i) * rho(i - 2, i - 2, alpha, lam, policy)


def _printed_gamma_12(alpha: float, lam: float, policy, log_form: bool = False) -> float:
    lead = (lam / (alpha - 1) - (lam + 1) / (alpha - 1) * (lam / (lam + 1)) ** alpha
            - (lam / (lam + 1)) ** 2)
    if log_form:
        return lead + (1 - alpha) * lam / (2 * (lam + 1)) * math.log((lam + 1) / lam)
    return lead + (1 - alpha) / (2 * (lam + 1)) * hypergeom_H(1, 2, lam, policy)


def gamma_matrix_closed_form(d: int, alpha: float, lam: float,
                             policy: AccuracyPolicy = DEFAULT_POLICY) -> np.ndarray:
    """Gamma from the hand-simplified closed forms, transcribed as typeset.

    Not used as a reference anywhere; see ``audit.audit_formulas``.
    """
    _check(alpha, lam)
    c = lambda k: c_coef(k, alpha)  # noqa: E731
    H = lambda b, cc: hypergeom_H(b, cc, lam, policy)  # noqa: E731
    m = d + 1
    g = np.empty((m, m))
    for i in range(1, m + 1):
        for j in range(i, m + 1):
            if i == j == 1:
                v = s0_squared(alpha, lam)
            elif i == j:
                v = _printed_s_sq(i, alpha, lam, policy)
            elif i == 1 and j == 2:
                v = _printed_gamma_12(alpha, lam, policy)
            elif i == 1:
                v = lam ** (2 - j) * (
                    -c(j - 2) * (lam + 1) ** -3 / (j - 1) * H(j - 3, j - 1)
                    + c(j - 1) * (lam + 1) ** -2 / j * H(j - 1, j)
                )
            elif j == i + 1:
                v = (-lam ** (1 + alpha - 2 * i) * c(i - 1) * (lam + 1) ** (i - 1 - alpha) / i
                     * H(i - alpha, i) - lam ** (2 - 2 * i) * rho(i - 2, i - 1, alpha, lam, policy))
            else:
                v = -lam ** (3 - i - j) * rho(i - 2, j - 2, alpha, lam, policy)
            g[i - 1, j - 1] = g[j - 1, i - 1] = v
    return g


def printed_integral_matrix(d: int, alpha: float, lam: float,
                            policy: AccuracyPolicy = DEFAULT_POLICY) -> np.ndarray:
    """The term-by-term integrals of the typeset f_ij, as typeset.

    Differs from ``gamma_matrix_closed_form`` only in writing H(1, 2) of the
    (1, 2) entry as an explicit logarithm and in expanding rho inline.
    """
    c = lambda k: c_coef(k, alpha)  # noqa: E731
    F = lambda b, cc: hypergeom_H(b, cc, lam, policy)  # noqa: E731
    m = d + 1
    g = np.empty((m, m))
    for i in range(1, m + 1):
        for j in range(i, m + 1):
            if i == j == 1:
                v = s0_squared(alpha, lam)
            elif i == 1 and j == 2:
                v = _printed_gamma_12(alpha, lam, policy, log_form=True)
            elif i == 1:
                v = lam ** (2 - j) * (
                    -c(j - 2) * (lam + 1) ** -3 / (j - 1) * F(j - 3, j - 1)
                    + c(j - 1) * (lam + 1) ** -2 / j * F(j - 1, j)
                )
            elif i == j:
                v = lam ** (alpha + 2 - 2 * i) * (
                    c(i - 2) * (lam + 1) ** (i - 3 - alpha) / (i - 1) * F(i - alpha - 2, i - 1)
                    + c(i - 1) * (lam + 1) ** (i - 2 - alpha) / i * F(i - alpha, i)
                ) - lam ** (3 - 2 * i) * (
                    c(i - 2) ** 2 * (lam + 1) ** -4 / (2 * i - 3) * F(2 * i - 2, 2 * i - 3)
                    - 2 * c(i - 1) * c(i - 2) * (lam + 1) ** -3 / (2 * i - 2) * F(2 * i - 1, 2 * i - 2)
                    + c(i - 1) ** 2 * (lam + 1) ** -2 / (2 * i - 1) * F(2 * i, 2 * i - 1)
                )
            elif j == i + 1:
                v = -c(i - 1) * lam ** (1 + alpha - 2 * i) * (lam + 1) ** (i - 1 - alpha) / i * F(
                    i - alpha, i
                ) - lam ** (2 - 2 * i) * (
                    c(i - 2) * c(i - 1) * (lam + 1) ** -4 / (2 * i - 2) * F(2 * i - 1, 2 * i - 2)
                    - (c(i - 1) ** 2 + c(i - 2) * c(i)) * (lam + 1) ** -3 / (2 * i - 1) * F(2 * i, 2 * i - 1)
                    + c(i - 1) * c(i) * (lam + 1) ** -2 / (2 * i) * F(2 * i + 1, 2 * i)
                )
            else:
                v = -lam ** (3 - i - j) * (
                    c(i - 2) * c(j - 2) * (lam + 1) ** -4 / (i + j - 3) * F(i + j - 2, i + j - 3)
                    - (c(i - 1) * c(j - 2) + c(i - 2) * c(j - 1)) * (lam + 1) ** -3 / (i + j - 2)
                    * F(i + j - 1, i + j - 2)
                    + c(i - 1) * c(j - 1) * (lam + 1) ** -2 / (i + j - 1) * F(i + j, i + j - 1)
                )
            g[i - 1, j - 1] = g[j - 1, i - 1] = v
    return g


def printed_f_ij(i: int, j: int, alpha: float, lam: float, x):
    """The hand-simplified integrand table as typeset (1-based)."""
    if i > j:
        i, j = j, i
    x = np.asarray(x, dtype=float)
    c = lambda k: c_coef(k, alpha)  # noqa: E731
    u = (lam + x) / lam
    L = x + lam
    if i == j == 1:
        return u ** (-1 - alpha) - u**-2
    if i == 1 and j == 2:
        return u**-alpha - lam * L**-3 + lam * c(1) * x * L**-2
    if i == 1:
        return lam ** (3 - j) * (-c(j - 2) * x ** (j - 2) * L**-3 + c(j - 1) * x ** (j - 1) * L**-2)
    if i == j:
        return lam ** (alpha + 3 - 2 * i) * (
            c(i - 2) * x ** (i - 2) * L ** (i - 3 - alpha) + c(i - 1) * x ** (i - 1) * L ** (i - 2 - alpha)
        ) - lam ** (4 - 2 * i) * (
            c(i - 2) ** 2 * x ** (2 * i - 4) * L**-4
            - 2 * c(i - 1) * c(i - 2) * x ** (2 * i - 3) * L**-3
            + c(i - 1) ** 2 * x ** (2 * i - 2) * L**-2
        )
    if j == i + 1:
        return -c(i - 1) * lam ** (2 + alpha - 2 * i) * x ** (i - 1) * L ** (i - 1 - alpha) - lam ** (
            3 - 2 * i
        ) * (
            c(i - 2) * c(i - 1) * x ** (2 * i - 3) * L**-4
            - (c(i - 1) ** 2 + c(i - 2) * c(i)) * x ** (2 * i - 2) * L**-3
            + c(i - 1) * c(i) * x ** (2 * i - 1) * L**-2
        )
    return -lam ** (4 - i - j) * (
        c(i - 2) * c(j - 2) * x ** (i + j - 4) * L**-4
        - (c(i - 1) * c(j - 2) + c(i - 2) * c(j - 1)) * x ** (i + j - 3) * L**-3
        + c(i - 1) * c(j - 1) * x ** (i + j - 2) * L**-2
    )


def printed_p_limit(i: int, alpha: float, lam: float, x):
    """Typeset limit of p_{i-1} (1-based i)."""
    x = np.asarray(x, dtype=float)
    if i == 1:
        return ((lam + x) / lam) ** (alpha - 1)
    return (rising_factorial(1 - alpha, i - 2) * lam ** (1 - alpha) / math.factorial(i - 2)
            * x ** (i - 2) * (x + lam) ** (alpha - i - 1))


# Second-order terms of the falling-moment expansions and their quartic
# combination, which must vanish.

def _expansion_AB(r: int, x: float, alpha: float, lam: float, frac_part: float):
    A = (x * x * alpha * (1 - alpha) + x * (lam * alpha - 2 * r * alpha * lam) - lam**2 * r**2) / (
        2 * x * lam * (x + lam)
    )
    B = (x * (r * (1 - 2 * frac_part) - alpha * (1 + 2 * frac_part)) + lam * r * (1 - 2 * frac_part)) / (
        2 * x * (x + lam)
    )
    return A, B


def expansion_S(r: int, s: int, x: float, alpha: float, lam: float, frac_part: float = 0.0) -> float:
    """Coefficient of n^{s-1} in E[(K_{r, floor(xn)})_s] = n^s m_r(x)^s + n^{s-1} S_s(x) + ..."""
    if not 0 < x <= 1:
        raise DomainError("x must lie in (0, 1]")
    if not 0 <= frac_part < 1:
        raise DomainError("frac_part must lie in [0, 1)")
    if s < 1:
        raise DomainError("s must be at least 1")
    m = m_r(r, alpha, lam, x)
    if r >= 1:
        A, B = _expansion_AB(r, x, alpha, lam, frac_part)
        return m**s * (s * s * A + s * B)
    u = (lam + x) / lam
    if alpha < ALPHA_ZERO:
        L = math.log(u)
        base = x * lam ** (s - 1) / (lam + x)
        if s == 1:
            return x / (2 * (lam + x))
        if s == 2:
            return base * (L - 1)
        if s == 3:
            return 3 * base * (0.5 * L * L - L)
        if s == 4:
            return 2 * base * (L**3 - 3 * L * L)
        raise DomainError("the alpha = 0 expansion is tabulated for s <= 4")
    if s == 1:
        return (1 - alpha) * x / (2 * (lam + x)) * u**alpha
    return s * (s - 1) * alpha / lam * m**s - (lam / alpha) ** 2 * alpha * x * s / (
        2 * lam * (lam + x)
    ) * u**alpha * (u**alpha * (alpha * s - 1) + 1 - alpha) * m ** (s - 2)


def B_check(r: int, x: float, alpha: float, lam: float, frac_part: float = 0.0) -> float:
    """-4 m^3 S_1 + 6 m^2 S_2 - 4 m S_3 + S_4; identically zero in theory."""
    m = m_r(r, alpha, lam, x)
    S = [expansion_S(r, s, x, alpha, lam, frac_part) for s in (1, 2, 3, 4)]
    return math.fsum([-4 * m**3 * S[0], 6 * m**2 * S[1], -4 * m * S[2], S[3]])


@dataclass
class CovModel:
    """Limit mean and covariances for one (d, alpha, lam), with provenance."""

    d: int
    alpha: float
    lam: float
    M: np.ndarray
    gamma_quadrature: np.ndarray
    gamma_closed_form: np.ndarray | None
    sigma: np.ndarray
    s_sq: np.ndarray
    sigma_linear_response: np.ndarray | None = None
    provenance: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def entries(mat, tag):
            return [
                {"i": i + 1, "j": j + 1, "value": float(mat[i, j]), "provenance": tag}
                for i in range(mat.shape[0])
                for j in range(mat.shape[1])
            ]

        out = {
            "d": self.d,
            "alpha": self.alpha,
            "lambda": self.lam,
            "M": [{"r": r, "value": float(v), "provenance": self.provenance["M"]}
                  for r, v in enumerate(self.M)],
            "Gamma": entries(self.gamma_quadrature, self.provenance["Gamma"]),
            "Sigma": entries(self.sigma, self.provenance["Sigma"]),
            "s_sq": [{"r": r, "value": float(v), "provenance": self.provenance["s_sq"]}
                     for r, v in enumerate(self.s_sq)],
        }
        if self.gamma_closed_form is not None:
            out["Gamma_closed_form"] = entries(self.gamma_closed_form, self.provenance["Gamma_closed_form"])
        if self.sigma_linear_response is not None:
            out["Sigma_linear_response"] = entries(self.sigma_linear_response,
                                                   self.provenance["Sigma_linear_response"])
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def check(self, tol: float = 1e-9) -> None:
        mats = [("Gamma", self.gamma_quadrature), ("Sigma", self.sigma)]
        if self.sigma_linear_response is not None:
            mats.append(("Sigma_linear_response", self.sigma_linear_response))
        for name, mat in mats:
            if not np.allclose(mat, mat.T, rtol=0, atol=1e-12):
                raise AccuracyError(f"{name} is not symmetric")
            if np.linalg.eigvalsh(mat).min() < -tol:
                raise AccuracyError(f"{name} is not positive semidefinite")


def build_cov_model(d: int, alpha: float, lam: float, closed_form: bool = True,
                    linear_response: bool = True,
                    policy: AccuracyPolicy = DEFAULT_POLICY) -> CovModel:
    gq = gamma_matrix_quadrature(d, alpha, lam, policy)
    gc = gamma_matrix_closed_form(d, alpha, lam, policy) if closed_form else None
    return CovModel(
        d=d,
        alpha=alpha,
        lam=lam,
        M=mean_vector(d, alpha, lam),
        gamma_quadrature=gq,
        gamma_closed_form=gc,
        sigma=sigma_matrix(gq, alpha, lam),
        s_sq=np.diag(gq).copy(),
        sigma_linear_response=sigma_linear_response(d, alpha, lam, policy) if linear_response else None,
        provenance={
            "M": "closed_form",
            "Gamma": "quadrature",
            "Sigma": "quadrature_scaled",
            "s_sq": "quadrature",
            "Gamma_closed_form": "closed_form_as_typeset",
            "Sigma_linear_response": "quadrature_drift_ode",
        },
    )
