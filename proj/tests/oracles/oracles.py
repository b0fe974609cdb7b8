"""Independent reference values for the C++ test suite.

Every value is computed here with mpmath at 50 significant digits, without
using any project code. The C++ tests hold the same numbers as literals;
`--check` recomputes them and fails if any frozen literal has drifted.
"""

import argparse
import json
import sys

import mpmath as mp

mp.mp.dps = 50


def tanh_one():
    return mp.tanh(1)


def matmul_example():
    a = [[1, 2], [3, 4]]
    b = [[5], [6]]
    return [[sum(mp.mpf(a[i][k]) * b[k][j] for k in range(2)) for j in range(1)] for i in range(2)]


def softmax_ln2_zero():
    xs = [mp.log(2), mp.mpf(0)]
    z = sum(mp.e ** x for x in xs)
    return [mp.e ** x / z for x in xs]


def layernorm_two_point(eps):
    xs = [mp.mpf(1), mp.mpf(3)]
    mu = sum(xs) / 2
    var = sum((x - mu) ** 2 for x in xs) / 2
    return [(x - mu) / mp.sqrt(var + eps) for x in xs]


def laplace_nll_unit_scale(steps):
    # Each of steps * 2 coordinates contributes log(2b) + |y - mu| / b with b = 1, y = mu.
    return steps * 2 * mp.log(2)


def uniform_ce(k):
    return -mp.log(mp.mpf(1) / k)


def arc_cv_endpoint_error(radius, speed, dt, horizon):
    """Endpoint error of constant-velocity extrapolation on a circular arc.

    The last two observed points sit on the circle at angles phi - d and phi,
    d = speed * dt / radius. Constant velocity continues the chord for
    `horizon` steps; the truth keeps turning to phi + horizon * d. The error
    does not depend on phi or on the circle's placement.
    """
    d = mp.mpf(speed) * dt / radius
    truth = radius * mp.expj(horizon * d)
    last = radius * mp.expj(0)
    prev = radius * mp.expj(-d)
    cv = last + horizon * (last - prev)
    return abs(truth - cv)


def dyt_saturation(gamma, beta):
    return gamma * 1 + beta


FROZEN = {
    "tanh_1": 0.7615941559557649,
    "matmul_17": 17.0,
    "matmul_39": 39.0,
    "softmax_ln2_0": 2.0 / 3.0,
    "softmax_ln2_1": 1.0 / 3.0,
    "layernorm_eps1e-5_0": -0.9999950000374996,
    "layernorm_eps1e-5_1": 0.9999950000374996,
    "laplace_nll_30": 41.58883083359672,
    "ce_uniform_6": 1.791759469228055,
    "ce_half": 0.6931471805599453,
    "arc_cv_r20_v8": 14.274423271766091,
    "dyt_saturation_2_1": 3.0,
}


def compute():
    m = matmul_example()
    s = softmax_ln2_zero()
    ln = layernorm_two_point(mp.mpf("1e-5"))
    return {
        "tanh_1": tanh_one(),
        "matmul_17": m[0][0],
        "matmul_39": m[1][0],
        "softmax_ln2_0": s[0],
        "softmax_ln2_1": s[1],
        "layernorm_eps1e-5_0": ln[0],
        "layernorm_eps1e-5_1": ln[1],
        "laplace_nll_30": laplace_nll_unit_scale(30),
        "ce_uniform_6": uniform_ce(6),
        "ce_half": uniform_ce(2),
        "arc_cv_r20_v8": arc_cv_endpoint_error(20, 8, mp.mpf("0.1"), 30),
        "dyt_saturation_2_1": dyt_saturation(2, 1),
    }


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--check", action="store_true", help="compare against the frozen literals")
    args = parser.parse_args()
    values = compute()
    if not args.check:
        json.dump({k: mp.nstr(v, 20) for k, v in values.items()}, sys.stdout, indent=2)
        print()
        return 0
    bad = []
    for key, frozen in FROZEN.items():
        exact = values[key]
        if abs(mp.mpf(frozen) - exact) > mp.mpf("1e-15") * max(1, abs(exact)):
            bad.append(f"{key}: frozen {frozen!r}, computed {mp.nstr(exact, 20)}")
    for line in bad:
        print(line)
    print("oracles:", "FAIL" if bad else "OK", f"({len(FROZEN)} values)")
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
