"""Independent reference values, computed with mpmath and no package code.

Run ``python3 tests/oracles/generate_oracles.py`` to regenerate
``tests/data/oracles.json``.  The tests only read the frozen file.
"""

import json
import os

import mpmath as mp

mp.mp.dps = 40
OUT = os.path.join(os.path.dirname(__file__), "..", "data", "oracles.json")


def lj_r0(m, n):
    return (m * mp.zeta(m) / (n * mp.zeta(n))) ** (mp.mpf(1) / (n - m))


def lj_d2(x, m, n, r0):
    # V(x) = -(r0/x)^m + (r0/x)^n
    return -m * (m + 1) * r0**m * x ** (-m - 2) + n * (n + 1) * r0**n * x ** (-n - 2)


def alpha_direct(m, n, r0, S):
    return mp.fsum(lj_d2(mp.mpf(s), m, n, r0) * s * s for s in range(1, S + 1))


def gauss(x, amp, w):
    return amp * mp.e ** (-((x / w) ** 2))


def gamma_gauss(phi, amp, w, S):
    h = mp.mpf(1) / 2
    return mp.fsum(gauss(s - h + phi, amp, w) - gauss(s - h, amp, w) for s in range(-S, S + 1))


def calib_residual(r0, m, n, eps, amp, w, S):
    h = mp.mpf(1) / 2
    bulk = 2 * (m * mp.zeta(m) * r0**m - n * mp.zeta(n) * r0**n)
    dU = lambda x: -2 * x / w**2 * gauss(x, amp, w)
    inter = mp.fsum((k - h) * dU(k - h) for k in range(-S, S + 1))
    return bulk + eps**2 * inter


def main():
    m, n = 6, 12
    r0 = lj_r0(m, n)
    out = {
        "lj_6_12_r0": float(r0),
        "lj_6_12_alpha_s1e4": float(alpha_direct(m, n, r0, 10_000)),
        "lj_6_12_alpha_s64": float(alpha_direct(m, n, r0, 64)),
        "gamma_gauss_1_1_half_s50": float(gamma_gauss(mp.mpf(1) / 2, 1, 1, 50)),
    }
    # residual root with a Gaussian(1, 1) inter-layer potential, S = 64
    for eps in ("0.05", "0.025"):
        e = mp.mpf(eps)
        root = mp.findroot(lambda r: calib_residual(r, m, n, e, 1, 1, 64), r0)
        out[f"lj_6_12_r0_gauss_eps{eps}"] = float(root)
    with open(OUT, "w") as fh:
        json.dump(out, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main()
