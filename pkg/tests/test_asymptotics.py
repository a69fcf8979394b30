import math

import numpy as np
import pytest
from scipy import integrate as sci_integrate

from ewens_pitman.asymptotics import (
    B_check,
    LimitProfile,
    build_cov_model,
    c_coef,
    drift_matrix,
    expansion_S,
    f_ij,
    gamma_matrix_closed_form,
    gamma_matrix_quadrature,
    limit_abc,
    m_r,
    mean_vector,
    p_limit_closed,
    q_limit_closed,
    rho,
    s0_squared,
    sigma_linear_response,
    sigma_matrix,
)
from ewens_pitman.audit import extrapolated_variance
from ewens_pitman.errors import DomainError
from ewens_pitman.exact_moments import falling_moment
from ewens_pitman.partition import ModelParams

ALPHAS = (0.0, 0.3, 0.7)
LAMS = (0.5, 1.0, 2.0)
XS = np.linspace(0.0, 1.0, 50)


def test_m_examples():
    assert m_r(0, 0.0, 1.0, 1.0) == pytest.approx(math.log(2), rel=1e-15)
    assert m_r(0, 0.5, 1.0, 1.0) == pytest.approx(2 * (math.sqrt(2) - 1), rel=1e-15)
    assert m_r(1, 0.0, 1.0, 1.0) == pytest.approx(0.5)
    assert m_r(2, 0.0, 1.0, 1.0) == pytest.approx(0.125)
    assert mean_vector(2, 0.0, 1.0) == pytest.approx([math.log(2), 0.5, 0.125])
    # m_1(1) = lam^(1-alpha) (1+lam)^(alpha-1) = 2^(-1/2) at alpha = 1/2, lam = 1
    assert mean_vector(1, 0.5, 1.0) == pytest.approx([2 * (math.sqrt(2) - 1), 1 / math.sqrt(2)])
    n = 10**5
    exact = falling_moment(1, 1, n, ModelParams.linear(0.5, 1.0, n)).value / n
    assert exact == pytest.approx(1 / math.sqrt(2), abs=1e-5)
    with pytest.raises(DomainError):
        m_r(0, 1.0, 1.0, 0.5)


@pytest.mark.parametrize("alpha", ALPHAS)
@pytest.mark.parametrize("lam", LAMS)
def test_m_mass_conservation_and_shape(alpha, lam):
    assert math.fsum(r * m_r(r, alpha, lam, 1.0) for r in range(1, 201)) == pytest.approx(1.0, abs=1e-6)
    for r in range(4):
        assert m_r(r, alpha, lam, 0.0) == 0.0
        assert np.all(m_r(r, alpha, lam, XS) >= 0)
    for r in (2, 3):
        small = [m_r(r, alpha, lam, x) / x**r for x in (1e-4, 1e-6)]
        assert small[1] > 0 and small[0] == pytest.approx(small[1], rel=1e-3)


def test_m_alpha_zero_is_the_alpha_limit():
    for lam in LAMS:
        assert m_r(0, 1e-9, lam, 0.7) == pytest.approx(m_r(0, 0.0, lam, 0.7), rel=1e-8)


def test_limit_abc_examples():
    prof = LimitProfile(0.0, 1.0)
    assert np.all(prof.a(0, XS) == 1.0)
    a, p, q = limit_abc(0, 0.3, 1.0, 0.0)
    assert p == pytest.approx(1.0)
    assert limit_abc(1, 0.0, 1.0, 1.0)[2] == pytest.approx(0.25)


@pytest.mark.parametrize("alpha", ALPHAS)
@pytest.mark.parametrize("lam", LAMS)
def test_limit_profile_properties(alpha, lam):
    prof = LimitProfile(alpha, lam)
    a0 = prof.a(0, XS)
    assert np.all((a0 > 0) & (a0 <= 1))
    for r in (1, 2, 3):
        ar = prof.a(r, XS)
        assert np.all(ar >= 1) and np.all(np.diff(ar) >= 0)
    assert np.array_equal(prof.p(0, XS), prof.p(1, XS))
    for r in range(5):
        assert np.max(np.abs(prof.p(r, XS) - p_limit_closed(r, alpha, lam, XS))) <= 1e-12
        assert np.max(np.abs(prof.q(r, XS) - q_limit_closed(r, alpha, lam, XS))) <= 1e-12


def test_c_coef():
    a = 0.3
    assert c_coef(0, a) == 1.0
    assert c_coef(1, a) == pytest.approx(1 - a)
    assert c_coef(2, a) == pytest.approx((1 - a) * (2 - a) / 2)


def test_f_ij_examples():
    x = XS
    assert f_ij(1, 1, 0.0, 1.0, x) == pytest.approx(1 / (1 + x) - (1 + x) ** -2.0, abs=1e-15)
    assert f_ij(1, 2, 0.0, 1.0, x) == pytest.approx(1 - (1 + x) ** -2.0, abs=1e-15)
    for alpha in ALPHAS:
        for lam in LAMS:
            assert f_ij(1, 3, alpha, lam, 0.0) == 0.0
            for i in range(1, 5):
                for j in range(1, 5):
                    assert np.array_equal(f_ij(i, j, alpha, lam, x), f_ij(j, i, alpha, lam, x))
    with pytest.raises(DomainError):
        f_ij(0, 1, 0.0, 1.0, 0.5)


def test_gamma_quadrature_values():
    g = gamma_matrix_quadrature(2, 0.0, 1.0)
    assert g[0, 0] == pytest.approx(math.log(2) - 0.5, abs=1e-12)
    assert g[0, 1] == pytest.approx(0.5, abs=1e-12)
    assert g[1, 1] == pytest.approx(1.5, abs=1e-12)


@pytest.mark.parametrize("alpha", ALPHAS)
@pytest.mark.parametrize("lam", LAMS)
def test_gamma_against_scipy_quad(alpha, lam):
    g = gamma_matrix_quadrature(3, alpha, lam)
    for i in range(1, 5):
        for j in range(i, 5):
            ref, _ = sci_integrate.quad(lambda x: f_ij(i, j, alpha, lam, x), 0, 1, epsabs=1e-14, epsrel=1e-13)
            assert g[i - 1, j - 1] == pytest.approx(ref, abs=1e-11)


@pytest.mark.parametrize("alpha", ALPHAS)
@pytest.mark.parametrize("lam", LAMS)
def test_gamma_and_sigma_symmetric_psd(alpha, lam):
    model = build_cov_model(5, alpha, lam, closed_form=False)
    for mat in (model.gamma_quadrature, model.sigma, model.sigma_linear_response):
        assert np.allclose(mat, mat.T, atol=1e-12, rtol=0)
        assert np.linalg.eigvalsh(mat).min() >= -1e-9
    model.check()


@pytest.mark.parametrize("alpha", (0.3, 0.7))
@pytest.mark.parametrize("lam", LAMS)
def test_gamma_11_equals_s0_squared(alpha, lam):
    assert gamma_matrix_quadrature(1, alpha, lam)[0, 0] == pytest.approx(s0_squared(alpha, lam), abs=1e-10)


@pytest.mark.parametrize("lam", LAMS)
def test_gamma_11_at_alpha_zero(lam):
    g11 = gamma_matrix_quadrature(1, 0.0, lam)[0, 0]
    corrected = lam * math.log((lam + 1) / lam) - lam / (lam + 1)
    assert g11 == pytest.approx(corrected, abs=1e-12)
    assert g11 == pytest.approx(s0_squared(1e-8, lam), abs=1e-7)
    # the alpha = 0 branch as typeset lacks the factor lam
    assert s0_squared(0.0, lam) == pytest.approx(corrected / lam, abs=1e-12)


def test_sigma_examples():
    g = gamma_matrix_quadrature(2, 0.0, 1.0)
    s = sigma_matrix(g, 0.0, 1.0)
    assert s[0, 0] == pytest.approx(g[0, 0], abs=1e-15)
    assert s[1, 1] == pytest.approx(3 / 8, abs=1e-12)
    assert s[0, 1] == pytest.approx(1 / 4, abs=1e-12)
    assert sigma_matrix(g, 0.0, 1.0, exponent="printed")[1, 1] == pytest.approx(6.0)
    with pytest.raises(DomainError):
        sigma_matrix(np.array([[1.0, 0.2], [0.1, 1.0]]), 0.0, 1.0)


def test_drift_matrix_diagonal_part_gives_conjugation():
    # Dropping the off-diagonal drift reproduces Gamma conjugated by the a-limits.
    alpha, lam, d = 0.4, 1.5, 3
    g = gamma_matrix_quadrature(d, alpha, lam)
    j = drift_matrix(d, alpha)
    assert np.allclose(np.diag(j), [alpha] + [-(r - alpha) for r in range(1, d + 1)])
    scale = ((lam + 1) / lam) ** np.diag(j)
    assert np.allclose(scale[:, None] * g * scale[None, :], sigma_matrix(g, alpha, lam), rtol=1e-13)


@pytest.mark.parametrize("alpha,lam", [(0.0, 1.0), (0.5, 1.0), (0.3, 0.5), (0.7, 2.0)])
def test_linear_response_diagonal_matches_exact_variances(alpha, lam):
    lr = sigma_linear_response(2, alpha, lam)
    for r in range(3):
        assert lr[r, r] == pytest.approx(extrapolated_variance(r, alpha, lam), rel=1e-7)


@pytest.mark.parametrize("alpha,lam,d,tol", [(0.0, 1.0, 30, 1e-7), (0.5, 1.0, 30, 1e-7), (0.3, 0.5, 45, 1e-6)])
def test_linear_response_respects_mass_conservation(alpha, lam, d, tol):
    # sum_r r K_r = n exactly, so sum_r r Sigma_rs -> 0 as d grows
    lr = sigma_linear_response(d, alpha, lam)
    r = np.arange(d + 1)
    assert np.abs(r[1:] @ lr[1:, :]).max() <= tol


def test_conjugation_misses_exact_variance_when_alpha_positive():
    g = gamma_matrix_quadrature(2, 0.5, 1.0)
    conj = sigma_matrix(g, 0.5, 1.0)
    exact = extrapolated_variance(1, 0.5, 1.0)
    assert exact == pytest.approx(0.3946067812, abs=1e-9)
    assert abs(conj[1, 1] / exact - 1) > 0.1


def test_conjugation_agrees_where_drift_is_diagonal():
    lr = sigma_linear_response(1, 0.0, 2.0)
    conj = sigma_matrix(gamma_matrix_quadrature(1, 0.0, 2.0), 0.0, 2.0)
    assert np.allclose(lr, conj, atol=1e-12)


def test_rho_and_closed_form_entry():
    assert rho(0, 0, 0.0, 1.0) == pytest.approx(1 / 288, rel=1e-12)
    gc = gamma_matrix_closed_form(2, 0.0, 1.0)
    assert gc[0, 0] == pytest.approx(math.log(2) - 0.5, abs=1e-12)


def test_expansion_examples():
    assert expansion_S(0, 1, 1.0, 0.0, 1.0) == pytest.approx(0.25)
    assert expansion_S(0, 1, 1.0, 0.5, 1.0) == pytest.approx(0.5 / 4 * math.sqrt(2))
    with pytest.raises(DomainError):
        expansion_S(0, 1, 0.0, 0.5, 1.0)


@pytest.mark.parametrize("alpha", ALPHAS)
@pytest.mark.parametrize("lam", LAMS)
def test_B_vanishes(alpha, lam):
    worst = max(abs(B_check(r, float(x), alpha, lam)) for r in range(6) for x in np.linspace(0.05, 1, 20))
    assert worst <= 1e-9


def test_cov_model_serialisation():
    model = build_cov_model(2, 0.3, 1.0)
    out = model.to_dict()
    assert {e["provenance"] for e in out["Sigma"]} == {"quadrature_scaled"}
    assert {e["provenance"] for e in out["Sigma_linear_response"]} == {"quadrature_drift_ode"}
    assert len(out["Gamma"]) == 9 and out["M"][0]["value"] == pytest.approx(m_r(0, 0.3, 1.0, 1.0))
    assert '"Gamma_closed_form"' in model.to_json()
