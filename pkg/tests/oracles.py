"""Frozen reference values, each derived by hand independently of the package.

Derivations are given next to each constant so the value can be checked
without running any code from ``cellhom``.
"""

import math

# 1D two-phase coefficient c = 1 on [0, 1/2), 2 on [1/2, 1).
# Cell problem at slope 1: constant flux, value (int 1/c)^-1 = (1/2 + 1/4)^-1.
TWOPHASE_HARMONIC = 4.0 / 3.0
# Zero corrector: mean of c.
TWOPHASE_ARITHMETIC = 1.5

# g(0) = 1/(tr I - |I|)^2 = 1/(2 - sqrt 2)^2 = (2 + sqrt 2)^2 / 4 = 3/2 + sqrt 2.
G_AT_ZERO = 2.914213562373095
# F = c(x)|xi|^4 with max c = 3/2: K = p max c = 6; K' = 3 K max{1, 1/c} with c = 1.
K_PRIME_DEFAULT = 18.0
MODULUS_SLOPE_DEFAULT = max(K_PRIME_DEFAULT, G_AT_ZERO)

# xi = [[0, 2], [0, 0]]: I + xi = [[1, 2], [0, 1]], tr = 2, |.| = sqrt 6 > 2, outside G.
OUTSIDE_G = [[0.0, 2.0], [0.0, 0.0]]

# Boundary-cell fraction (k^d - (k-2)^d)/k^d at k = 10, d = 2.
COUNTING_BOUND_10_2 = 0.36

# Kuhn meshes: (kn)^d cubes, d! simplices each, (kn+1)^d vertices.
MESH_COUNTS = {
    (1, 1, 4): (4, 5, 1.0),
    (2, 1, 2): (8, 9, 1.0),
    (2, 3, 2): (72, 49, 9.0),
}

# d = 1, n = 2, hat of height 1/2 at x = 1/2: slopes +1 then -1.
HAT_SLOPES = (1.0, -1.0)

# Lattice cells of side 0.3 inside (0,1)^2: floor(1/0.3)^2 = 9; residual 1 - 9 * 0.09.
OSC_CELLS_03 = 9
OSC_RESIDUAL_03 = 0.19

# Dyadic packing of (0, 1) with cap 0.3: first side 2^-j < 0.3 is 1/4.
VITALI_1D_CELLS = 4
VITALI_1D_SIDE = 0.25

# Barrier 1/(1 - t^2) along t -> 1 diverges; |t| -> 1.
HAT_ABS_BOX_AT_1 = 1.0


def g_closed_form(tr: float, norm: float) -> float:
    return 1.0 / (tr - norm) ** 2


def two_slope_laminate(f, xi: float, s_grid) -> float:
    """min over s of (f(xi + s) + f(xi - s)) / 2 (volume fractions one half)."""
    return min(0.5 * (f(xi + s) + f(xi - s)) for s in s_grid)


SQRT2 = math.sqrt(2.0)
