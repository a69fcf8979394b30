"""Special functions: gamma ratios, polygamma, factorials, Stirling numbers,
the hypergeometric values H(b, c) and adaptive quadrature.

Everything here is scalar, pure and reentrant.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import AccuracyError, DomainError

__all__ = [
    "AccuracyPolicy",
    "DEFAULT_POLICY",
    "log_gamma",
    "log_gamma_ratio",
    "gamma_ratio",
    "rising_factorial",
    "log_rising_factorial",
    "falling_factorial",
    "stirling2",
    "polygamma",
    "polygamma_diff",
    "hyp2f1_series",
    "hypergeom_H",
    "power_integral",
    "integrate",
]


@dataclass(frozen=True)
class AccuracyPolicy:
    abs_tol: float = 1e-12
    rel_tol: float = 1e-12
    max_series_terms: int = 100_000
    quadrature_max_depth: int = 50
    # Ratio sum|t| / |sum t| above which a signed sum is reported as unreliable.
    cancellation_limit: float = 1e12

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0 and self.cancellation_limit > 0):
            raise DomainError("tolerances must be strictly positive")
        if self.max_series_terms <= 0 or self.quadrature_max_depth <= 0:
            raise DomainError("iteration bounds must be strictly positive")


DEFAULT_POLICY = AccuracyPolicy()

# B_2, B_4, ..., B_16
_BERNOULLI_EVEN = (
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
)

# Arguments at or above this use the asymptotic (Stirling / de Moivre) series.
_ASYMPTOTIC_FROM = 10.0
_POLYGAMMA_FROM = 20.0


def _check_positive_finite(x, name="x"):
    if not math.isfinite(x) or x <= 0:
        raise DomainError(f"{name} must be positive and finite, got {x!r}")


def log_gamma(x: float) -> float:
    """Natural log of the gamma function for x > 0."""
    _check_positive_finite(x)
    return math.lgamma(x)


def _stirling_log_ratio(u1: float, u2: float, delta: float) -> float:
    # log Gamma(u1) - log Gamma(u2), both >= _ASYMPTOTIC_FROM, without forming
    # the two large log-gamma values. delta = u1 - u2 is passed in exactly
    # because the rounded difference of u1 and u2 can lose most of its digits.
    head = (u2 - 0.5) * math.log1p(delta / u2) + delta * math.log(u1) - delta
    # k = 1 term written so that it is exact in delta for tiny offsets
    tail = _BERNOULLI_EVEN[0] / 2.0 * (-delta / (u1 * u2))
    p1, p2 = 1.0 / u1, 1.0 / u2
    q1, q2 = p1 * p1, p2 * p2
    for k in range(2, len(_BERNOULLI_EVEN) + 1):
        p1 *= q1
        p2 *= q2
        tail += _BERNOULLI_EVEN[k - 1] / (2 * k * (2 * k - 1)) * (p1 - p2)
    return head + tail


def log_gamma_ratio(z: float, beta: float, gamma: float) -> float:
    """log(Gamma(z + beta) / Gamma(z + gamma)), accurate when z is large.

    Small arguments are shifted upward with the recurrence so that a small
    offset ``beta - gamma`` never loses digits to a subtraction of two
    large log-gamma values.
    """
    u1, u2 = z + beta, z + gamma
    _check_positive_finite(u1, "z + beta")
    _check_positive_finite(u2, "z + gamma")
    delta = beta - gamma
    if delta == 0.0:
        return 0.0
    low = min(u1, u2)
    if low >= _ASYMPTOTIC_FROM:
        return _stirling_log_ratio(u1, u2, delta)
    shift = int(math.ceil(_ASYMPTOTIC_FROM - low))
    correction = math.fsum(math.log1p(delta / (u2 + k)) for k in range(shift))
    return _stirling_log_ratio(u1 + shift, u2 + shift, delta) - correction


def gamma_ratio(z: float, beta: float, gamma: float, asymptotic: bool = False) -> float:
    """Gamma(z + beta) / Gamma(z + gamma).

    With ``asymptotic=True`` returns the two-term large-z expansion
    z**(beta-gamma) * (1 + (beta-gamma)(beta+gamma-1) / (2z)) instead.
    """
    if asymptotic:
        _check_positive_finite(z, "z")
        d = beta - gamma
        return z**d * (1.0 + d * (beta + gamma - 1.0) / (2.0 * z))
    return math.exp(log_gamma_ratio(z, beta, gamma))


def rising_factorial(x: float, n: int, a: float = 1.0) -> float:
    """prod_{i<n} (x + i*a); the empty product (n = 0) is 1."""
    if n < 0:
        raise DomainError("order must be non-negative")
    return math.prod(x + i * a for i in range(n))


def log_rising_factorial(x: float, n: int, a: float = 1.0) -> float:
    if n < 0:
        raise DomainError("order must be non-negative")
    total = []
    for i in range(n):
        f = x + i * a
        if not f > 0:
            raise DomainError(f"factor {f!r} of the rising factorial is not positive")
        total.append(math.log(f))
    return math.fsum(total)


def falling_factorial(k: int, s: int) -> int:
    """k (k-1) ... (k-s+1) as an exact integer; zero once s exceeds k."""
    if k < 0 or s < 0:
        raise DomainError("falling_factorial takes non-negative integers")
    if s > k:
        return 0
    out = 1
    for i in range(s):
        out *= k - i
    return out


_STIRLING_MAX_ARG = 64
_UINT64_MAX = 2**64 - 1


@lru_cache(maxsize=None)
def _stirling2_row(k: int) -> tuple:
    if k == 0:
        return (1,)
    prev = _stirling2_row(k - 1)
    row = [0] * (k + 1)
    for s in range(1, k + 1):
        left = prev[s] if s < len(prev) else 0
        row[s] = s * left + prev[s - 1]
    return tuple(row)


def stirling2(k: int, s: int) -> int:
    """Stirling number of the second kind S(k, s).

    Arguments are limited to 64 and results to the unsigned 64-bit range;
    anything larger raises ``OverflowError``.
    """
    if k < 0 or s < 0:
        raise DomainError("stirling2 takes non-negative integers")
    if k > _STIRLING_MAX_ARG or s > _STIRLING_MAX_ARG:
        raise OverflowError(f"stirling2 supports arguments up to {_STIRLING_MAX_ARG}")
    if s > k:
        return 0
    value = _stirling2_row(k)[s]
    if value > _UINT64_MAX:
        raise OverflowError(f"S({k}, {s}) does not fit in 64 bits")
    return value


def _polygamma_asymptotic(order: int, x: float) -> float:
    if order == 0:
        acc = math.log(x) - 0.5 / x
        x2 = x * x
        p = 1.0
        for k, b in enumerate(_BERNOULLI_EVEN, start=1):
            p /= x2
            acc -= b / (2 * k) * p
        return acc
    m = order
    acc = math.factorial(m - 1) / x**m + math.factorial(m) / (2.0 * x ** (m + 1))
    for k, b in enumerate(_BERNOULLI_EVEN, start=1):
        acc += b * math.factorial(2 * k + m - 1) / math.factorial(2 * k) / x ** (2 * k + m)
    return acc if m % 2 == 1 else -acc


def polygamma(order: int, x: float) -> float:
    """psi^(order)(x) for order in {0, 1, 2, 3} and x > 0."""
    if order not in (0, 1, 2, 3):
        raise DomainError("polygamma is implemented for orders 0..3")
    _check_positive_finite(x)
    shift = max(0, int(math.ceil(_POLYGAMMA_FROM - x)))
    # psi^(m)(x) = psi^(m)(x + N) - (-1)^m m! sum_{k<N} (x+k)^-(m+1)
    sign = -1.0 if order % 2 == 0 else 1.0
    fact = math.factorial(order)
    corr = math.fsum(fact / (x + k) ** (order + 1) for k in range(shift))
    return _polygamma_asymptotic(order, x + shift) + sign * corr


# Below this many unit steps the difference psi(z + h) - psi(z) is summed
# term by term; the subtraction of two large psi values would lose digits.
_DIRECT_SUM_STEPS = 64


def _polygamma_step_diff(order: int, z: float, h: int) -> float:
    # psi^(m)(z + h) - psi^(m)(z) = (-1)^m m! sum_{i<h} (z+i)^-(m+1)
    fact = math.factorial(order)
    s = math.fsum(fact / (z + i) ** (order + 1) for i in range(h))
    return s if order % 2 == 0 else -s


def polygamma_shift_diff(order: int, z: float, h: float) -> float:
    """psi^(order)(z + h) - psi^(order)(z) for z > 0, h >= 0."""
    if h == 0:
        return 0.0
    if float(h).is_integer() and 0 < h <= _DIRECT_SUM_STEPS:
        _check_positive_finite(z, "z")
        return _polygamma_step_diff(order, z, int(h))
    return polygamma(order, z + h) - polygamma(order, z)


def polygamma_diff(order: int, n: int, lam: float, x: float) -> float:
    """Phi_order(n, lam, x) = psi^(order)(n (lam + x)) - psi^(order)(n lam)."""
    if n < 1:
        raise DomainError("n must be a positive integer")
    _check_positive_finite(lam, "lambda")
    if not 0.0 <= x <= 1.0:
        raise DomainError("x must lie in [0, 1]")
    return polygamma_shift_diff(order, n * lam, n * x)


def _is_nonpositive_integer(v: float) -> bool:
    return v <= 0 and float(v).is_integer()


def hyp2f1_series(a: float, b: float, c: float, z: float, policy: AccuracyPolicy = DEFAULT_POLICY) -> float:
    """Gauss series 2F1(a, b; c; z) for |z| < 1 (or a terminating series)."""
    if _is_nonpositive_integer(c):
        raise DomainError(f"c = {c!r} is a non-positive integer")
    terms = [1.0]
    t = 1.0
    for k in range(policy.max_series_terms):
        ratio = (a + k) * (b + k) / ((c + k) * (k + 1)) * z
        t *= ratio
        if t == 0.0:
            return math.fsum(terms)
        terms.append(t)
        rho = max(abs(ratio), abs(z))
        if rho < 1.0:
            tail = abs(t) * rho / (1.0 - rho)
            if tail <= policy.rel_tol * 1e-4 * abs(math.fsum(terms)):
                return math.fsum(terms)
    raise AccuracyError(
        f"2F1({a}, {b}; {c}; {z}) did not converge in {policy.max_series_terms} terms",
        best_estimate=math.fsum(terms),
    )


def hypergeom_H(b: float, c: float, lam: float, policy: AccuracyPolicy = DEFAULT_POLICY) -> float:
    """H(b, c) = 2F1(1, b; c; -1/lam), continued analytically to every lam > 0.

    Evaluated through the Pfaff transformation
    2F1(1, b; c; z) = (1 - z)^(-b) 2F1(c - 1, b; c; z / (z - 1)),
    whose argument 1 / (1 + lam) lies in (0, 1).
    """
    _check_positive_finite(lam, "lambda")
    if _is_nonpositive_integer(c):
        raise DomainError(f"c = {c!r} is a non-positive integer")
    w = 1.0 / (1.0 + lam)
    prefactor = ((lam + 1.0) / lam) ** (-b)
    return prefactor * hyp2f1_series(c - 1.0, b, c, w, policy)


def power_integral(a: float, b: float, lam: float, corrected: bool = True,
                   policy: AccuracyPolicy = DEFAULT_POLICY) -> float:
    """Integral of x^a (x + lam)^b over [0, 1] through H(a+b+2, a+2).

    ``corrected=False`` reproduces the variant with prefactor (lam+1)^b, which
    is off by a factor lam + 1 (compare a = b = 0, where the integral is 1).
    """
    if a <= -1:
        raise DomainError("the integral diverges for a <= -1")
    power = b + 1.0 if corrected else b
    return (lam + 1.0) ** power / (lam * (a + 1.0)) * hypergeom_H(a + b + 2.0, a + 2.0, lam, policy)


# Gauss-Kronrod 7/15 nodes on [-1, 1] (positive half; node 0 last).
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KRONROD_W = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GAUSS_W = np.zeros(15)
_GAUSS_W[[1, 3, 5]] = _WG[:3]
_GAUSS_W[[13, 11, 9]] = _WG[:3]
_GAUSS_W[7] = _WG[3]


def _evaluate(f, xs):
    try:
        ys = np.asarray(f(xs), dtype=float)
        if ys.shape != xs.shape:
            raise ValueError
    except (TypeError, ValueError):
        ys = np.array([float(f(float(x))) for x in xs])
    if not np.all(np.isfinite(ys)):
        raise DomainError("integrand is not finite on the integration interval")
    return ys


def _gk15(f, lo, hi):
    half = 0.5 * (hi - lo)
    ys = _evaluate(f, 0.5 * (hi + lo) + half * _NODES)
    kron = half * float(np.dot(_KRONROD_W, ys))
    gauss = half * float(np.dot(_GAUSS_W, ys))
    return kron, abs(kron - gauss)


def integrate(f, a: float, b: float, policy: AccuracyPolicy = DEFAULT_POLICY) -> float:
    """Adaptive Gauss-Kronrod (7/15) quadrature by interval bisection.

    ``f`` may be vectorised over numpy arrays; scalar callables also work.
    Raises ``AccuracyError`` (with the best estimate attached) once an
    interval would have to be split beyond ``policy.quadrature_max_depth``.
    """
    if a == b:
        return 0.0
    if a > b:
        return -integrate(f, b, a, policy)
    est, err = _gk15(f, a, b)
    # heap entries: (-error, serial, depth, lo, hi); serial breaks ties
    heap = [(-err, 0, 0, a, b)]
    pieces = {0: (est, err)}
    serial = 1
    while True:
        total = math.fsum(v[0] for v in pieces.values())
        total_err = math.fsum(v[1] for v in pieces.values())
        if total_err <= max(policy.abs_tol, policy.rel_tol * abs(total)):
            return total
        _, key, depth, lo, hi = heapq.heappop(heap)
        if depth >= policy.quadrature_max_depth:
            raise AccuracyError(
                "quadrature exceeded the maximum bisection depth",
                best_estimate=total,
                error_estimate=total_err,
            )
        del pieces[key]
        mid = 0.5 * (lo + hi)
        for sub_lo, sub_hi in ((lo, mid), (mid, hi)):
            e, r = _gk15(f, sub_lo, sub_hi)
            pieces[serial] = (e, r)
            heapq.heappush(heap, (-r, serial, depth + 1, sub_lo, sub_hi))
            serial += 1
