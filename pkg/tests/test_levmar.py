"""Solver cross-checks against scipy.optimize on reference problems."""

import numpy as np
from scipy.optimize import curve_fit

from atomfringe.levmar import levenberg_marquardt


def _fit(x, y, model, jac_cols, p0):
    def residuals(p):
        return model(x, *p) - y

    def jacobian(p):
        return np.column_stack(jac_cols(x, *p))

    return levenberg_marquardt(residuals, jacobian, p0)


def test_exponential_decay_matches_scipy():
    def model(x, a, b, c):
        return a * np.exp(-b * x) + c

    def jac_cols(x, a, b, c):
        e = np.exp(-b * x)
        return [e, -a * x * e, np.ones_like(x)]

    rng = np.random.default_rng(1)
    x = np.linspace(0.0, 5.0, 80)
    truth = (2.5, 1.3, 0.4)
    y = model(x, *truth) + 0.01 * rng.normal(size=x.size)

    res = _fit(x, y, model, jac_cols, p0=[1.0, 1.0, 0.0])
    popt, _ = curve_fit(model, x, y, p0=[1.0, 1.0, 0.0])
    assert res.converged
    assert np.allclose(res.params, popt, rtol=1e-7, atol=1e-9)


def test_sinusoid_matches_scipy():
    def model(x, a, k, phi, c):
        return a * np.sin(k * x + phi) + c

    def jac_cols(x, a, k, phi, c):
        s = np.sin(k * x + phi)
        co = np.cos(k * x + phi)
        return [s, a * x * co, a * co, np.ones_like(x)]

    rng = np.random.default_rng(2)
    x = np.linspace(0.0, 4.0 * np.pi, 120)
    truth = (0.8, 1.05, 0.6, 0.2)
    y = model(x, *truth) + 0.02 * rng.normal(size=x.size)

    res = _fit(x, y, model, jac_cols, p0=[0.5, 1.0, 0.0, 0.0])
    popt, _ = curve_fit(model, x, y, p0=[0.5, 1.0, 0.0, 0.0])
    assert res.converged
    assert np.allclose(res.params, popt, rtol=1e-6, atol=1e-8)


def test_noiseless_recovers_exactly():
    def model(x, a, b):
        return a * x + b * x**2

    def jac_cols(x, a, b):
        return [x, x**2]

    x = np.linspace(-1, 1, 30)
    y = model(x, 1.7, -0.3)
    res = _fit(x, y, model, jac_cols, p0=[0.2, 0.2])
    assert res.converged
    assert res.rss < 1e-24
    assert np.allclose(res.params, [1.7, -0.3], atol=1e-10)


def test_iteration_cap_flags_nonconvergence():
    # pathological zigzag target with a hopeless model and a tiny iteration cap
    rng = np.random.default_rng(3)
    x = np.linspace(0, 1, 50)
    y = rng.normal(size=50)

    def residuals(p):
        return np.exp(p[0] * x) + p[1] - y

    def jacobian(p):
        return np.column_stack([x * np.exp(p[0] * x), np.ones_like(x)])

    res = levenberg_marquardt(residuals, jacobian, [5.0, 0.0], max_iterations=1, rss_rtol=0.0)
    assert res.iterations == 1


def test_covariance_scale():
    # linear model: covariance must match the closed form sigma^2 (X^T X)^-1
    rng = np.random.default_rng(4)
    x = np.linspace(0, 1, 400)
    sigma = 0.05
    y = 2.0 * x + 1.0 + sigma * rng.normal(size=x.size)

    def residuals(p):
        return p[0] * x + p[1] - y

    def jacobian(p):
        return np.column_stack([x, np.ones_like(x)])

    res = levenberg_marquardt(residuals, jacobian, [0.0, 0.0])
    xmat = np.column_stack([x, np.ones_like(x)])
    closed = np.linalg.inv(xmat.T @ xmat) * res.rss / (x.size - 2)
    assert np.allclose(res.covariance, closed, rtol=1e-6)
