"""Independent high-precision oracles (mpmath) for frozen test values.

Run: python3 oracles/golden_oracle.py
"""
import mpmath as mp

mp.mp.dps = 40
pi = mp.pi


def coth(x):
    return mp.cosh(x) / mp.sinh(x)


def g_matrix(k, m, w, sigma, gam, lam=None):
    def d(l):
        return 1 if lam is None else l**2 / (l**2 + k**2)
    a = -k**2 + w[0]**2 - 2j * gam[0] * k * d(lam[0] if lam else None)
    b = sigma
    c = -k**2 + w[1]**2 - 2j * gam[1] * k * d(lam[1] if lam else None)
    det = a * c - b * b
    return [[c / det / m, -b / det / m], [-b / det / m, a / det / m]]


def golden_current(m=1, w=(1, 1), sigma=mp.mpf('0.3'), gam=(mp.mpf('0.05'),) * 2, b1=1, b2=2):
    # transmission form, folded to (0, inf)
    def f(k):
        g = g_matrix(k, m, w, sigma, gam)
        return k * (2 * m * gam[0] * k) * (2 * m * gam[1] * k) * (coth(b1 * k / 2) - coth(b2 * k / 2)) * abs(g[0][1])**2 / m**0
    s = sorted([mp.sqrt(1 - sigma), mp.sqrt(1 + sigma)])
    pts = [0, s[0] - 0.2, s[0], s[0] + 0.1, s[1], s[1] + 0.2, 3, 10, mp.inf]
    return mp.quad(f, pts) / pi


def golden_current_sum(m=1, w=(1, 1), sigma=mp.mpf('0.3'), gam=(mp.mpf('0.05'),) * 2, b1=1, b2=2):
    # P_xi + P_gamma route, entry (1,1), strict Ohmic
    def f(k):
        g = g_matrix(k, m, w, sigma, gam)
        e2 = [8 * pi * m * x for x in gam]
        im0 = k / (4 * pi)
        F = [coth(b1 * k / 2), coth(b2 * k / 2)]
        # Im G_11
        img11 = mp.im(g[0][0])
        gh11 = sum(abs(g[0][j])**2 * e2[j] * F[j] * im0 for j in range(2))
        return k * e2[0] * im0 * (F[0] * img11 - gh11)
    s = sorted([mp.sqrt(1 - sigma), mp.sqrt(1 + sigma)])
    pts = [0, s[0] - 0.2, s[0], s[0] + 0.1, s[1], s[1] + 0.2, 3, 10, mp.inf]
    return mp.quad(f, pts) / pi


if __name__ == '__main__':
    print('J_transmission', mp.nstr(golden_current(), 20))
    print('J_sum         ', mp.nstr(golden_current_sum(), 20))


def powers_finite_cutoff(lam, m=1, w=(1, 1), sigma=mp.mpf('0.3'), gam=(mp.mpf('0.05'),) * 2, betas=(1, 2)):
    """P_xi and P_gamma matrices with a Drude cutoff lam on both baths.

    Folded forms: P_xi = (1/pi) int k A Im G_R,  P_gamma = -(1/pi) int k B Re G_H,
    A = diag(e_i^2 coth(b_i k/2) Im G0_i), B = diag(e_i^2 Im G0_i).
    """
    e2 = [8 * pi * m * x for x in gam]

    def parts(k):
        g = g_matrix(k, m, w, sigma, gam, (lam, lam))
        D = lam**2 / (lam**2 + k**2)
        B = [e2[i] * k / (4 * pi) * D for i in range(2)]
        A = [B[i] * coth(betas[i] * k / 2) for i in range(2)]
        GH = [[sum(g[i][l] * A[l] * mp.conj(g[j][l]) for l in range(2)) for j in range(2)] for i in range(2)]
        return g, A, B, GH

    s = sorted([mp.sqrt(1 - sigma), mp.sqrt(1 + sigma)])
    pts = [0, s[0] - 0.2, s[0], s[0] + 0.1, s[1], s[1] + 0.2, 3, 10, lam, 4 * lam, mp.inf]
    xi = [[mp.quad(lambda k, i=i, j=j: k * parts(k)[1][i] * mp.im(parts(k)[0][i][j]), pts) / pi for j in range(2)] for i in range(2)]
    ga = [[-mp.quad(lambda k, i=i, j=j: k * parts(k)[2][i] * mp.re(parts(k)[3][i][j]), pts) / pi for j in range(2)] for i in range(2)]
    return xi, ga


if __name__ == '__main__':
    xi, ga = powers_finite_cutoff(mp.mpf(20))
    for name, M in (('P_xi (cutoff 20)', xi), ('P_gamma (cutoff 20)', ga)):
        print(name)
        for row in M:
            print('   ', [mp.nstr(x, 20) for x in row])
    print('net_11 (cutoff 20)', mp.nstr(xi[0][0] + ga[0][0], 20))
