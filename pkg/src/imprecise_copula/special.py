"""Special functions used by the elliptical and Archimedean copula families."""

import numpy as np
from scipy import integrate, special

# Below this |theta| the Debye integrand is replaced by its series expansion.
_DEBYE_SERIES_LIMIT = 1e-6


def student_t_cdf(x, nu: float) -> np.ndarray:
    """
    Student-t CDF with continuous degrees of freedom.

    Uses the regularized incomplete beta function:
    F(x) = 1 - I_{nu/(nu+x^2)}(nu/2, 1/2) / 2 for x >= 0, mirrored for x < 0.

    Args:
        x: Evaluation points
        nu: Degrees of freedom (> 0)

    Returns:
        CDF values with the shape of ``x``
    """
    x = np.asarray(x, dtype=float)
    tail = 0.5 * special.betainc(0.5 * nu, 0.5, nu / (nu + x * x))
    return np.where(x >= 0.0, 1.0 - tail, tail)


def student_t_ppf(p, nu: float) -> np.ndarray:
    """Inverse of :func:`student_t_cdf`."""
    return special.stdtrit(nu, np.asarray(p, dtype=float))


def _debye_integrand(t: float) -> float:
    if abs(t) < _DEBYE_SERIES_LIMIT:
        return 1.0 - 0.5 * t
    return t / np.expm1(t)


def debye1(theta: float) -> float:
    """
    First-order Debye function D_1(theta) = (1/theta) * int_0^theta t / (e^t - 1) dt.

    Evaluated by adaptive Gauss-Kronrod quadrature (QUADPACK) to 1e-10. Negative
    ``theta`` integrates in the reverse direction, which keeps the identity used by
    the Frank Kendall-tau formula valid on both branches.
    """
    if theta == 0.0:
        return 1.0
    value, _ = integrate.quad(_debye_integrand, 0.0, theta, epsabs=1e-12, epsrel=1e-10, limit=200)
    return value / theta
