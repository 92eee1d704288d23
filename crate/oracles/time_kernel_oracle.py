"""Free-bath noise kernel in time, K(tau) = (1/pi) int_0^inf cos(k tau) coth(beta k/2) k/(4 pi) L^2/(L^2+k^2) dk.

Reference values by direct oscillatory quadrature (mpmath.quadosc), compared
against the Matsubara-series and exponential-integral closed forms.
Also the underdamped Green's function value at t = 3.
Run: python3 oracles/time_kernel_oracle.py
"""
import mpmath as mp

mp.mp.dps = 30
pi = mp.pi


def direct(tau, beta, lam):
    def f(k):
        th = 1 if beta == mp.inf else mp.coth(beta * k / 2)
        return mp.cos(k * tau) * k * th * lam**2 / (lam**2 + k**2)
    return mp.quadosc(f, [0, mp.inf], omega=tau) / (4 * pi**2)


def vacuum_closed(tau, lam):
    x = lam * tau
    return -(lam**2 / (4 * pi**2)) * mp.mpf(1) / 2 * (mp.exp(-x) * mp.ei(x) + mp.exp(x) * mp.e1(x))


def vacuum_closed_diff(tau, lam):
    x = lam * tau
    return -(lam**2 / (4 * pi**2)) * mp.mpf(1) / 2 * (mp.exp(-x) * mp.ei(x) - mp.exp(x) * mp.e1(x))


def matsubara(tau, beta, lam, nmax=4000):
    s = lam**2 / (8 * pi) * mp.cot(beta * lam / 2) * mp.exp(-lam * tau)
    for n in range(1, nmax):
        nu = 2 * pi * n / beta
        s += lam**2 / (2 * pi * beta) * nu * mp.exp(-nu * tau) / (nu**2 - lam**2)
    return s


cases = [
    (mp.mpf("0.01"), mp.mpf(2), mp.mpf(10)),
    (mp.mpf("0.1"), mp.mpf(2), mp.mpf(10)),
    (mp.mpf("0.5"), mp.mpf(2), mp.mpf(10)),
    (mp.mpf(1), mp.mpf(2), mp.mpf(10)),
    (mp.mpf(3), mp.mpf(2), mp.mpf(10)),
    (mp.mpf("0.05"), mp.mpf(1), mp.mpf(50)),
    (mp.mpf("0.3"), mp.mpf(1), mp.mpf(50)),
    (mp.mpf(2), mp.mpf("0.5"), mp.mpf(50)),
    (mp.mpf("0.02"), mp.mpf(20), mp.mpf(5)),
]
for tau, beta, lam in cases:
    d = direct(tau, beta, lam)
    print("tau", tau, "beta", beta, "lam", lam, "direct", mp.nstr(d, 20), "matsubara", mp.nstr(matsubara(tau, beta, lam), 20))

# Resonant pair: beta*lam/2 = 3 pi exactly.
lam = mp.mpf(10)
beta = 6 * pi / lam
print("resonant beta", mp.nstr(beta, 20))
for tau in (mp.mpf("0.05"), mp.mpf("0.5")):
    print("  tau", tau, "direct", mp.nstr(direct(tau, beta, lam), 20))

for tau in (mp.mpf(1), mp.mpf("0.01"), mp.mpf(10)):
    d = direct(tau, mp.inf, mp.mpf(10))
    print("zero T tau", tau, "direct", mp.nstr(d, 20), "sum form", mp.nstr(vacuum_closed(tau, 10), 20), "diff form", mp.nstr(vacuum_closed_diff(tau, 10), 20))

w = mp.sqrt(1 - mp.mpf("0.0025"))
print("G_R(3)", mp.nstr(mp.exp(-mp.mpf("0.15")) * mp.sin(3 * w) / w, 20))
