"""Writes crates/cli/tests/golden/reference.json from mpmath references.

Regenerate deliberately: python3 oracles/cli_golden.py
The golden NESS chain is m=1, omega=(1,1), sigma=0.3, gamma=(0.05,0.05),
T=(1, 0.5), strict Ohmic baths.
"""
import json
import pathlib

import mpmath as mp

from golden_oracle import golden_current, golden_current_sum

mp.mp.dps = 40
m = mp.mpf(1)
w = [mp.mpf(1), mp.mpf(1)]
s = mp.mpf("0.3")
g = [mp.mpf("0.05"), mp.mpf("0.05")]
beta = [mp.mpf(1), mp.mpf(2)]


def coth(x):
    return mp.cosh(x) / mp.sinh(x)


def frob(M):
    return mp.sqrt(sum(abs(M[i, j]) ** 2 for i in range(M.rows) for j in range(M.cols)))


def pointwise(k):
    K = mp.matrix([[w[0] ** 2 - k ** 2 - 2j * k * g[0], s], [s, w[1] ** 2 - k ** 2 - 2j * k * g[1]]])
    G = K ** -1 / m
    e2 = [8 * mp.pi * m * gi for gi in g]
    A = mp.diag([e2[i] * coth(beta[i] * k / 2) * k / (4 * mp.pi) for i in range(2)])
    GH = G * A * G.transpose_conj()
    F = mp.diag([coth(beta[i] * k / 2) for i in range(2)])
    img = mp.matrix([[mp.im(G[i, j]) for j in range(2)] for i in range(2)])
    bias = (G * F - F * G) * G ** -1 * img
    return frob(bias), frob(GH)


def main():
    j = golden_current()
    j_sum = golden_current_sum()
    assert abs(j - j_sum) < mp.mpf("1e-25"), (j, j_sum)
    samples = {}
    for k in ("-0.9", "0.9", "1.3"):
        b, h = pointwise(mp.mpf(k))
        samples[k] = {"bias_norm": float(b), "hadamard_norm": float(h)}
    ref = {
        "heat_current_j": float(j),
        "heat_current_j_6sig": float(mp.nstr(j, 6)),
        "fdr_samples": samples,
        "source": "oracles/cli_golden.py",
    }
    out = pathlib.Path(__file__).resolve().parent.parent / "crates/cli/tests/golden/reference.json"
    out.write_text(json.dumps(ref, indent=2, sort_keys=True) + "\n")
    print(out.read_text())


if __name__ == "__main__":
    main()
