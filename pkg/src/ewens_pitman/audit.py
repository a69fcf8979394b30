"""Cross-check of the hand-simplified closed forms against independent
references: quadrature of the compositional integrands, exact finite-n
variances extrapolated in n, and exact products."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import asymptotics as asy
from .exact_moments import central_moment
from .partition import ModelParams
from .specfun import integrate, log_gamma_ratio, power_integral

__all__ = ["MATCH_TOL", "Finding", "AuditReport", "audit_formulas", "extrapolated_variance"]

MATCH_TOL = 1e-8


@dataclass(frozen=True)
class Finding:
    location: str
    closed_form_value: float
    reference_value: float
    abs_diff: float
    verdict: str
    detail: str = ""


@dataclass
class AuditReport:
    d: int
    alpha: float
    lam: float
    findings: list = field(default_factory=list)

    def add(self, location: str, closed: float, reference: float, detail: str = "",
            diff: float | None = None) -> Finding:
        diff = abs(closed - reference) if diff is None else diff
        if not math.isfinite(diff):
            diff = math.inf
        f = Finding(location, float(closed), float(reference), float(diff),
                    "MATCH" if diff <= MATCH_TOL else "MISMATCH", detail)
        self.findings.append(f)
        return f

    def find(self, location: str) -> Finding:
        for f in self.findings:
            if f.location == location:
                return f
        raise KeyError(location)

    @property
    def mismatches(self) -> list:
        return [f for f in self.findings if f.verdict == "MISMATCH"]

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "alpha": self.alpha,
            "lambda": self.lam,
            "match_tolerance": MATCH_TOL,
            "counts": {"MATCH": len(self.findings) - len(self.mismatches),
                       "MISMATCH": len(self.mismatches)},
            "findings": [asdict(f) for f in self.findings],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_text(self) -> str:
        lines = [f"formula audit: d={self.d} alpha={self.alpha} lambda={self.lam} "
                 f"(MATCH iff |diff| <= {MATCH_TOL:g})"]
        width = max(len(f.location) for f in self.findings)
        for f in self.findings:
            lines.append(
                f"{f.verdict:8s} {f.location:<{width}s}  closed={f.closed_form_value:.12g}  "
                f"reference={f.reference_value:.12g}  |diff|={f.abs_diff:.3g}"
                + (f"  [{f.detail}]" if f.detail else "")
            )
        lines.append(f"{len(self.mismatches)} mismatches out of {len(self.findings)} comparisons")
        return "\n".join(lines)


def extrapolated_variance(r: int, alpha: float, lam: float, n0: int = 4000) -> float:
    """lim Var(K_{r,n}) / n from exact variances at n0, 2 n0, 4 n0.

    Var / n = v + a / n + b / n^2 + ..., so (8 V(4n) - 6 V(2n) + V(n)) / 3
    removes the first two corrections.
    """
    v = []
    for n in (n0, 2 * n0, 4 * n0):
        params = ModelParams.linear(alpha, lam, n, d=max(r, 1))
        v.append(central_moment(r, 2, n, params) / n)
    return (8 * v[2] - 6 * v[1] + v[0]) / 3


def _sup_gap(fa, fb, xs):
    a = np.asarray(fa(xs), dtype=float)
    b = np.asarray(fb(xs), dtype=float)
    k = int(np.argmax(np.abs(a - b)))
    return float(a[k]), float(b[k]), float(abs(a[k] - b[k])), float(xs[k])


def _a0_exact(x: float, alpha: float, lam: float, n: int) -> float:
    # a_{0,h} with h = floor(xn) + 1: prod_{k=1}^{h-1} (theta+k) / (theta+k+alpha)
    theta = lam * n
    h = math.floor(x * n) + 1
    # = Gamma(theta+h) Gamma(theta+1+alpha) / (Gamma(theta+h+alpha) Gamma(theta+1)),
    # paired so that each ratio has an offset of at most alpha
    return math.exp(log_gamma_ratio(theta + h, 0.0, alpha) - log_gamma_ratio(theta + 1, 0.0, alpha))


def audit_formulas(d: int = 2, alpha: float = 0.0, lam: float = 1.0,
                   x_points: int = 41) -> AuditReport:
    """Compare each hand-simplified display with its independent reference."""
    rep = AuditReport(d, alpha, lam)
    xs = np.linspace(0.0, 1.0, x_points)
    m = d + 1
    gq = asy.gamma_matrix_quadrature(d, alpha, lam)

    gc = asy.gamma_matrix_closed_form(d, alpha, lam)
    for i in range(m):
        for j in range(i, m):
            rep.add(f"Gamma closed form ({i + 1},{j + 1})", gc[i, j], gq[i, j],
                    "reference: quadrature of the compositional integrand")

    gi = asy.printed_integral_matrix(d, alpha, lam)
    for i in range(m):
        for j in range(i, m):
            rep.add(f"integral table ({i + 1},{j + 1})", gi[i, j], gq[i, j],
                    "reference: quadrature of the compositional integrand")

    for i in range(1, m + 1):
        for j in range(i, m + 1):
            a, b, diff, x = _sup_gap(
                lambda t, i=i, j=j: asy.printed_f_ij(i, j, alpha, lam, t),
                lambda t, i=i, j=j: asy.f_ij(i, j, alpha, lam, t), xs)
            rep.add(f"integrand table f({i},{j})", a, b, f"sup over x grid, worst at x={x:.3g}", diff)

    for i in range(1, m + 1):
        a, b, diff, x = _sup_gap(
            lambda t, i=i: asy.printed_p_limit(i, alpha, lam, t),
            lambda t, i=i: asy.LimitProfile(alpha, lam).p(i - 1, t) * np.ones_like(t), xs)
        rep.add(f"p-limit p_{i - 1}(x)", a, b, f"sup over x grid, worst at x={x:.3g}", diff)

    # Integral identity for x^a (x+lam)^b, both prefactors.
    worst = {True: (0.0, 0.0, 0.0, ""), False: (0.0, 0.0, 0.0, "")}
    for a in range(0, 7):
        for b in list(range(-4, 3)) + [-alpha, alpha - 1]:
            ref = integrate(lambda t, a=a, b=b: t**a * (t + lam) ** b, 0.0, 1.0)
            for corrected in (True, False):
                val = power_integral(a, b, lam, corrected=corrected)
                if abs(val - ref) >= worst[corrected][2]:
                    worst[corrected] = (val, ref, abs(val - ref), f"worst at a={a}, b={b:g}")
    for corrected, label in ((False, "(lam+1)^b"), (True, "(lam+1)^(b+1)")):
        val, ref, diff, where = worst[corrected]
        rep.add(f"integral identity, prefactor {label}", val, ref, where, diff)
    one = power_integral(0, 0, lam, corrected=False)
    rep.add("integral identity at a=b=0, prefactor (lam+1)^b", one, 1.0, "integral of 1 over [0,1]")
    rep.add("integral identity at a=b=0, prefactor (lam+1)^(b+1)",
            power_integral(0, 0, lam, corrected=True), 1.0, "integral of 1 over [0,1]")

    # Sigma scaling against extrapolated exact variances (diagonal).
    printed = asy.sigma_matrix(gq, alpha, lam, exponent="printed")
    corrected = asy.sigma_matrix(gq, alpha, lam, exponent="corrected")
    ref_var = [extrapolated_variance(r, alpha, lam) for r in range(m)]
    for r in range(m):
        rep.add(f"Sigma scaling ({r + 1},{r + 1}), exponent i+j-2-2alpha", printed[r, r], ref_var[r],
                "reference: exact Var/n extrapolated in n")
        rep.add(f"Sigma scaling ({r + 1},{r + 1}), exponent 2alpha+2-i-j", corrected[r, r], ref_var[r],
                "reference: exact Var/n extrapolated in n")

    # Conjugation against the drift-corrected covariance, every entry.
    lr = asy.sigma_linear_response(d, alpha, lam)
    for r in range(m):
        rep.add(f"Sigma linear response ({r + 1},{r + 1})", lr[r, r], ref_var[r],
                "reference: exact Var/n extrapolated in n")
    for i in range(m):
        for j in range(i, m):
            rep.add(f"Sigma conjugation vs linear response ({i + 1},{j + 1})", corrected[i, j], lr[i, j],
                    "reference: drift ODE including the coupling of K_r to K_(r-1) and K")

    rep.add("s0^2 as typeset vs Gamma (1,1)", asy.s0_squared(alpha, lam), gq[0, 0],
            "reference: quadrature")

    # Limit variances after normalising by s_r^2 = Gamma_{r+1,r+1}.
    u = lam / (lam + 1)
    rep.add("normalised limit variance of K_n", u ** (2 * alpha), ref_var[0] / gq[0, 0],
            "typeset (lam/(lam+1))^(2 alpha)")
    rep.add("normalised limit variance of K_n, exponent 2(r - alpha)", u ** (-2 * alpha),
            ref_var[0] / gq[0, 0], "conjugation factor (lam/(lam+1))^(-2 alpha)")
    for r in range(1, m):
        rep.add(f"normalised limit variance of K_{r},n", u ** (2 * alpha - r), ref_var[r] / gq[r, r],
                "typeset (lam/(lam+1))^(2 alpha - r)")
        rep.add(f"normalised limit variance of K_{r},n, exponent 2(r - alpha)", u ** (2 * r - 2 * alpha),
                ref_var[r] / gq[r, r], "conjugation factor (lam/(lam+1))^(2r - 2 alpha)")

    # Limit of a_{0, floor(xn)+1}.
    n_big = 10**12
    a, b, diff, x = _sup_gap(
        lambda t: (lam / (lam + t)) ** (1 + alpha),
        lambda t: np.array([_a0_exact(v, alpha, lam, n_big) for v in t]), xs)
    rep.add("limit of a_0 along the path, typeset (lam/(lam+x))^(1+alpha)", a, b,
            f"reference: exact product at n=1e12, worst at x={x:.3g}", diff)
    a, b, diff, x = _sup_gap(
        lambda t: (lam / (lam + t)) ** alpha,
        lambda t: np.array([_a0_exact(v, alpha, lam, n_big) for v in t]), xs)
    rep.add("limit of a_0 along the path, (lam/(lam+x))^alpha", a, b,
            f"reference: exact product at n=1e12, worst at x={x:.3g}", diff)

    # Small-x slope of m_1.
    x0 = 1e-10
    rep.add("limit of m_1(x)/x as x -> 0, typeset 0", 0.0, asy.m_r(1, alpha, lam, x0) / x0,
            f"reference: m_1(x)/x at x={x0:g}")

    # Quartic combination of the expansion terms.
    worst_b = 0.0
    for r in range(0, 6):
        for x in np.linspace(0.05, 1.0, 20):
            worst_b = max(worst_b, abs(asy.B_check(r, float(x), alpha, lam)))
    rep.add("quartic expansion coefficient B vanishes", worst_b, 0.0, "max over r<=5 and 20 x points")
    return rep
