"""Independent reference values, computed without the package's code paths.

Run ``python tests/oracles/compute_oracles.py`` to regenerate the numbers
frozen in ``tests/frozen.py``.  Uses mpmath quadrature and brute-force
Riemann sums with analytic tail corrections.
"""

import math

import mpmath as mp
import numpy as np

mp.mp.dps = 30


def c_alpha(alpha):
    alpha = mp.mpf(alpha)
    if alpha == 1:
        return 2 / mp.pi
    return (1 - alpha) / (mp.gamma(2 - alpha) * mp.cos(mp.pi * alpha / 2))


def frechet_mean_quad(alpha, beta):
    shape = mp.mpf(alpha) / beta
    near = mp.quad(lambda t: 1 - mp.exp(-t ** (-shape)), [0, 1])
    # u = t**(-shape) on [1, inf); the leading term u**(-1/shape) is integrated in closed form
    e = 1 / shape
    rest = mp.quad(lambda u: (-mp.expm1(-u) - u) * u ** (-e - 1), [0, 1])
    far = (rest + 1 / (1 - e)) / shape
    return near + far


def sas_abs_moment_quad(alpha, p):
    # E|X|^p = (2/pi) Gamma(p+1) sin(pi p/2) int_0^inf (1 - e^{-t^alpha}) t^{-p-1} dt
    integral = mp.quad(lambda t: (1 - mp.exp(-t ** alpha)) * t ** (-p - 1), [0, 1, mp.inf])
    return 2 / mp.pi * mp.gamma(p + 1) * mp.sin(mp.pi * p / 2) * integral


def lfsm_b1_riemann(H, alpha, lo=-1e4, step=1e-4):
    """b_1^alpha = int |g_0|^alpha over [lo, 1] by midpoint sums, plus the tail below lo."""
    a = H - 1 / alpha
    total = 0.0
    chunk = 10 ** 7
    n_cells = int(round((1.0 - lo) / step))
    for start in range(0, n_cells, chunk):
        idx = np.arange(start, min(start + chunk, n_cells))
        s = lo + (idx + 0.5) * step
        up = np.where(1 - s > 0, np.abs(1 - s) ** a, 0.0)
        dn = np.where(-s > 0, np.abs(s) ** a, 0.0)
        total += np.sum(np.abs(up - dn) ** alpha) * step
    # tail: |(L+1)^a - L^a|^alpha ~ |a|^alpha L^{q} (1 + alpha (a-1)/(2L)), q = alpha (a - 1)
    L = -lo
    q = alpha * (a - 1)
    tail = abs(a) ** alpha * (L ** (q + 1) / (-(q + 1)) + alpha * (a - 1) / 2 * L ** q / (-q))
    return total + tail


def kappa_riemann(H, alpha, lo=1e-8, hi=1e4, n=4 * 10 ** 7):
    """kappa_tilde with a log-spaced midpoint rule on [lo, hi] and analytic end corrections."""
    q = alpha * H + 1
    u = np.linspace(math.log(lo), math.log(hi), n + 1)
    um = 0.5 * (u[1:] + u[:-1])
    x = np.exp(um)
    f = (1 - np.cos(x)) ** (alpha / 2) * x ** (-q) * x
    integral = np.sum(f) * (u[1] - u[0])
    # near 0: (1-cos x)^{a/2} ~ (x^2/2)^{a/2}
    integral += 2 ** (-alpha / 2) * lo ** (alpha - q + 1) / (alpha - q + 1)
    # beyond hi: replace (1-cos)^{a/2} by its period mean
    mean = float(mp.quad(lambda t: (1 - mp.cos(t)) ** (alpha / 2), [0, 2 * mp.pi]) / (2 * mp.pi))
    integral += mean * hi ** (1 - q) / (q - 1)
    return 2 ** -0.5 * (2 * integral) ** (-1 / alpha)


def hfsm_bn_riemann(H, alpha, **kw):
    q = alpha * H + 1
    lo, hi, n = kw.get("lo", 1e-8), kw.get("hi", 1e4), kw.get("n", 4 * 10 ** 7)
    u = np.linspace(math.log(lo), math.log(hi), n + 1)
    x = np.exp(0.5 * (u[1:] + u[:-1]))
    f = np.abs(2 * np.sin(x / 2)) ** alpha * x ** (1 - q)
    integral = np.sum(f) * (u[1] - u[0])
    integral += lo ** (alpha - q + 1) / (alpha - q + 1)
    mean = float(mp.quad(lambda t: abs(2 * mp.sin(t / 2)) ** alpha, [0, 2 * mp.pi]) / (2 * mp.pi))
    integral += mean * hi ** (1 - q) / (q - 1)
    return kappa_riemann(H, alpha) * (2 * integral) ** (1 / alpha)


if __name__ == "__main__":
    for a in (0.5, 1.2, 1.5):
        print(f"c_alpha({a}) = {mp.nstr(c_alpha(a), 15)}")
    for alpha in (0.8, 1.5):
        for r in (0.1, 0.25, 0.5, 0.75, 0.9):
            print(f"frechet_mean({alpha}, {alpha * r!r}) = {mp.nstr(frechet_mean_quad(alpha, alpha * r), 15)}")
    print("sas_abs_moment(1.2, 0.3) =", mp.nstr(sas_abs_moment_quad(1.2, 0.3), 15))
    print("sas_abs_moment(1.5, 0.75) =", mp.nstr(sas_abs_moment_quad(1.5, 0.75), 15))
    print("lfsm_b1_alpha(0.8, 1.5) =", repr(float(lfsm_b1_riemann(0.8, 1.5))))
    print("kappa(0.7, 1.5) =", repr(float(kappa_riemann(0.7, 1.5))))
    print("kappa(0.5, 1.5) =", repr(float(kappa_riemann(0.5, 1.5))))
    print("hfsm_bn(0.5, 1.5) =", repr(float(hfsm_bn_riemann(0.5, 1.5))))
    print("levy_cdf_at_1 =", mp.nstr(mp.erfc(mp.mpf(1) / 2), 15))
    print("limit_constant(1.5, 0.75, 1) =", mp.nstr(mp.sqrt(c_alpha(1.5)) * mp.sqrt(mp.pi), 15))
    print("limit_constant(1.2, 0.3, 1) =", mp.nstr(c_alpha(1.2) ** 0.25 * mp.gamma(0.75), 15))
