"""Straight-line evaluation of the golden spot values.

Deliberately independent of the package: constants are retyped by hand and
only the ``math`` module is used. Run it directly to regenerate the numbers
frozen in ``tests/test_golden.py``.
"""
import math

# fat, 5-term Gaussian sum: (a, b, c)
FAT = [
    (33.53, 411.5, 38.38),
    (50.09, 968.7, 525.9),
    (3.66, 742.9, 80.22),
    (2.5, 671.2, 32.97),
    (19.86, 513.8, 119.2),
]
DEOXY = [
    (38.63, 423.9, 33.06),
    (60.18, 31.57, 660.8),
    (25.11, 559.3, 59.08),
    (2.988, 664.7, 28.53),
]
OXY = [
    (14.0, 419.7, 16.97),
    (13.75, 581.5, 11.68),
    (29.69, 559.9, 46.71),
    (4.317e15, -25880.0, 4668.0),
    (-34.3, 642.6, 162.5),
]
WATER_A0 = 324.1
WATER_A = [102.2, -568.0, -126.6, 236.8, 73.0, -40.53, -12.92]
WATER_B = [697.9, 121.7, -395.3, -107.1, 115.6, 35.46, -8.373]
WATER_W = 0.006663


def gauss(terms, lam):
    total = 0.0
    for a, b, c in terms:
        z = (lam - b) / c
        total += a * math.exp(-z * z)
    return total


def water(lam):
    total = WATER_A0
    for k in range(7):
        i = k + 1
        total += WATER_A[k] * math.cos(i * WATER_W * lam)
        total += WATER_B[k] * math.sin(i * WATER_W * lam)
    return total


def melanin(lam):
    return 519.0 * (lam / 550.0) ** -3


def skin(lam):
    B, S, W, F, M = 0.0041, 0.992, 0.261, 0.225, 0.0115
    clamp = lambda v: v if v > 0 else 0.0
    return (
        B * S * clamp(gauss(OXY, lam))
        + B * (1 - S) * clamp(gauss(DEOXY, lam))
        + W * clamp(water(lam))
        + F * clamp(gauss(FAT, lam))
        + M * melanin(lam)
    )


if __name__ == "__main__":
    print("fat@411.5   ", repr(gauss(FAT, 411.5)))
    print("water@550   ", repr(water(550.0)))
    print("water@450   ", repr(water(450.0)))
    print("water@800   ", repr(water(800.0)))
    print("water@1000  ", repr(water(1000.0)))
    print("skin@550    ", repr(skin(550.0)))
    print("melanin@550 ", repr(0.0115 * melanin(550.0)))
    print("oxy@550     ", repr(gauss(OXY, 550.0)))
    print("deoxy@550   ", repr(gauss(DEOXY, 550.0)))
