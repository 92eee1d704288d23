"""High-precision reference values for pointwise Green's function quantities.

Parameters: m=1, omega=(1,1), sigma=0.3, gamma=(0.05,0.05), strict Ohmic,
beta=(1,2), kappa=0.9. Also the scalar FDR check at gamma=0.05, omega=1,
beta=2, kappa=1.3. Run: python3 oracles/pointwise_oracle.py
"""
import mpmath as mp

mp.mp.dps = 40
m = mp.mpf(1)
w = [mp.mpf(1), mp.mpf(1)]
s = mp.mpf("0.3")
g = [mp.mpf("0.05"), mp.mpf("0.05")]
beta = [mp.mpf(1), mp.mpf(2)]
k = mp.mpf("0.9")


def retarded(k):
    K = mp.matrix([[w[0] ** 2 - k ** 2 - 2j * k * g[0], s], [s, w[1] ** 2 - k ** 2 - 2j * k * g[1]]])
    return K ** -1 / m


def coth(x):
    return mp.cosh(x) / mp.sinh(x)


G = retarded(k)
e2 = [8 * mp.pi * m * gi for gi in g]
A = mp.diag([e2[i] * coth(beta[i] * k / 2) * k / (4 * mp.pi) for i in range(2)])
GH = G * A * G.transpose_conj()
F = mp.diag([coth(beta[i] * k / 2) for i in range(2)])
comm = G * F - F * G
bias = comm * G ** -1 * mp.matrix([[mp.im(G[i, j]) for j in range(2)] for i in range(2)])

def show(name, M):
    print(name)
    for i in range(M.rows):
        print("  ", [(mp.nstr(mp.re(M[i, j]), 20), mp.nstr(mp.im(M[i, j]), 20)) for j in range(M.cols)])

show("G_R(0.9)", G)
show("G_H(0.9)", GH)
show("[G_R,F](0.9)", comm)
show("bias(0.9)", bias)
print("coth(0.5), coth(1):", mp.nstr(coth(mp.mpf("0.5")), 20), mp.nstr(coth(mp.mpf(1)), 20))

# scalar FDR check
gs, ws, bs, ks = mp.mpf("0.05"), mp.mpf(1), mp.mpf(2), mp.mpf("1.3")
Gs = 1 / (m * (ws ** 2 - ks ** 2 - 2j * gs * ks))
e2s = 8 * mp.pi * m * gs
GHs = abs(Gs) ** 2 * e2s * coth(bs * ks / 2) * ks / (4 * mp.pi)
print("scalar G_H(1.3):", mp.nstr(GHs, 20), " coth*ImG:", mp.nstr(coth(bs * ks / 2) * mp.im(Gs), 20))
