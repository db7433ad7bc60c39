"""Independent reference implementations used as test oracles.

Everything here is computed by a different route than the library: explicit
Hermite polynomials from scipy.special instead of the in-package recurrence,
adaptive quadrature instead of Gauss-Hermite rules, and closed-form Gaussian
integrals worked out by completing the square.  Values asserted in the tests
are frozen from these, never from the code under test.
"""

import math

import numpy as np
from scipy.integrate import quad
from scipy.special import eval_hermite


def psi_reference(n: int, x):
    """psi_n(x) = (2/pi)^(1/4) (2^n n!)^(-1/2) H_n(sqrt(2) x) exp(-x^2)."""
    x = np.asarray(x, dtype=float)
    norm = math.sqrt(2.0**n * math.factorial(n))
    return (2.0 / np.pi) ** 0.25 * eval_hermite(n, np.sqrt(2.0) * x) * np.exp(-x * x) / norm


def kernel_element_quad(n: int, m: int, delta_x: float, x_m: float) -> float:
    """<n|P(x_m)|m> by adaptive quadrature of the position-space integral."""
    kappa = 1.0 / (4.0 * delta_x**2)
    pref = (2.0 * np.pi * delta_x**2) ** -0.25

    def integrand(x):
        return psi_reference(n, x) * psi_reference(m, x) * np.exp(-kappa * (x - x_m) ** 2)

    val, _ = quad(integrand, -np.inf, np.inf, limit=400)
    return pref * val


def vacuum_diag_element(delta_x: float) -> float:
    """<0|P(0)|0> = (2 pi dx^2)^(-1/4) (2/pi)^(1/2) sqrt(pi/alpha), alpha = 2 + 1/(4 dx^2)."""
    alpha = 2.0 + 1.0 / (4.0 * delta_x**2)
    return (2.0 * np.pi * delta_x**2) ** -0.25 * np.sqrt(2.0 / np.pi) * np.sqrt(np.pi / alpha)


def vacuum_density(delta_x: float, x_m) -> np.ndarray:
    """Vacuum outcome density: the normal density with variance dx^2 + 1/4."""
    var = delta_x**2 + 0.25
    x_m = np.asarray(x_m, dtype=float)
    return np.exp(-(x_m**2) / (2.0 * var)) / np.sqrt(2.0 * np.pi * var)


def p1_exact(delta_x: float, x_m) -> np.ndarray:
    """|<1|P(x_m)|0>|^2 in closed form by completing the square.

    <1|P|0> = pref (2/pi)^(1/2) 2 x0 exp(-2 k x^2/alpha) sqrt(pi/alpha) with
    x0 = k x / alpha, k = 1/(4 dx^2), alpha = 2 + k.
    """
    x_m = np.asarray(x_m, dtype=float)
    kappa = 1.0 / (4.0 * delta_x**2)
    alpha = 2.0 + kappa
    x0 = kappa * x_m / alpha
    amp = (
        (2.0 * np.pi * delta_x**2) ** -0.25
        * np.sqrt(2.0 / np.pi)
        * 2.0
        * x0
        * np.sqrt(np.pi / alpha)
        * np.exp(-2.0 * kappa * x_m**2 / alpha)
    )
    return amp**2


def p1_asymptotic(delta_x: float, x_m) -> np.ndarray:
    x_m = np.asarray(x_m, dtype=float)
    return (
        (2.0 * np.pi * delta_x**2) ** -0.5
        * x_m**2
        / (4.0 * delta_x**2) ** 2
        * np.exp(-(x_m**2) / (2.0 * delta_x**2))
    )


def jump_probability_exact(delta_x: float) -> float:
    """1 - integral of |<0|P|0>|^2 = 1 - (1 + 1/(8 dx^2))^(-1/2), closed form."""
    return 1.0 - (1.0 + 1.0 / (8.0 * delta_x**2)) ** -0.5


def correlation_exact(delta_x: float) -> float:
    """Closed-form sum over n >= 1 of n * integral of P_n (x^2 - dx^2).

    The conditioned vacuum is the Gaussian exp(-k(x - x_m)^2) psi_0, a
    displaced squeezed state with center k x_m/(1+k) and squeezed width
    1/(4(1+k)), so sum_n n P_n(x_m) = P(x_m) (x_c^2 + k^2/(4(1+k))).
    Integrating against the outcome density moments (E x^2 = V,
    E x^4 = 3 V^2 with V = dx^2 + 1/4) gives the value below; it tends to
    1/8 as dx grows.
    """
    k = 1.0 / (4.0 * delta_x**2)
    v = delta_x**2 + 0.25
    term_displacement = k**2 * v * (2.0 * delta_x**2 + 0.75) / (1.0 + k) ** 2
    term_squeeze = (k**2 / (4.0 * (1.0 + k))) * 0.25
    return term_displacement + term_squeeze
