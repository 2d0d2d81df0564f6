"""High-precision reference evaluations of the theory constants.

Written independently of the package with mpmath at 50 digits, so agreement
checks both the formulas and floating-point handling.
"""

from mpmath import mp, mpf, log, sqrt, exp

mp.dps = 50


def kl(a, b):
    a, b = mpf(a), mpf(b)
    return a * log(a / b) + (1 - a) * log((1 - a) / (1 - b))


def c_alpha(alpha):
    alpha = mpf(alpha)
    return 2 * (1 - alpha) / (1 - 2 * alpha)


def delta1(n, d, delta, sigma):
    return sqrt(2) * mpf(sigma) * sqrt((d * log(6) + log(3 / mpf(delta))) / mpf(n))


def m_prime(n, d, delta):
    n = mpf(n)
    return (sqrt(n) + sqrt(d) + sqrt(2 * log(4 / mpf(delta)))) ** 2 / n


def delta2(n, d, delta, M, mp_, sigma1, sigma2, alpha2, r):
    n, sigma1, sigma2 = mpf(n), mpf(sigma1), mpf(sigma2)
    big = max(mpf(M), mpf(mp_))
    inner = (d * log(18 * big / sigma2) + d * log(n / d) / 2
             + log(6 * sigma2**2 * mpf(r) * sqrt(n) / (mpf(alpha2) * sigma1 * mpf(delta))))
    return sigma2 * sqrt(2 / n) * sqrt(inner)


def rho(L, M, xi2):
    L, M = mpf(L), mpf(M)
    return 1 - sqrt(1 - L**2 / (4 * M**2)) - mpf(xi2) * L / (2 * M**2)


def good_event_lower(k, gap, delta):
    return 1 - exp(-k * kl(gap, delta))
