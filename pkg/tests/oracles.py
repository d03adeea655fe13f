"""Closed-form reference values, written without the package.

Each function is a direct transcription of a multiplier or counting
argument and shares no code with ``twistcoh``.
"""

import math
from itertools import combinations, product

import numpy as np

TWO_PI = 2 * math.pi


def torus_constant_dims(q, theta_bar, cutoff, tol=1e-9):
    """``d - theta ^`` on ``e^{2 pi i k.x}`` is the Koszul differential of ``2 pi i k - theta``.

    A Koszul complex is exact unless its vector vanishes, in which case
    every degree contributes ``binom(q, p)``.
    """
    zero_modes = 0
    for k in product(range(-cutoff, cutoff + 1), repeat=q):
        m = [complex(-theta_bar[j], TWO_PI * k[j]) for j in range(q)]
        if max(abs(x) for x in m) < tol:
            zero_modes += 1
    return [math.comb(q, p) * zero_modes for p in range(q + 1)]


def torus_min_block_eigenvalue(q, theta_bar, cutoff):
    """Laplacian on mode ``k`` is ``|2 pi i k - theta|^2 Id``."""
    return min(sum(abs(complex(-theta_bar[j], TWO_PI * k[j])) ** 2 for j in range(q))
               for k in product(range(-cutoff, cutoff + 1), repeat=q))


def mapping_torus_dims(mu, c, cutoff=32):
    """Basic complex of the suspension: subsets ``S`` of transverse directions.

    On ``f(t) e^S`` the differential is ``f' - (sum_S mu + c) f`` in the
    ``dt`` direction only, so each zero multiplier ``2 pi i n - sum_S mu - c``
    gives one class in degree ``|S|`` and one in ``|S| + 1``.
    """
    q = len(mu) + 1
    out = [0] * (q + 1)
    for r in range(q):
        for S in combinations(mu, r):
            for n in range(-cutoff, cutoff + 1):
                if abs(complex(-sum(S) - c, TWO_PI * n)) < 1e-9:
                    out[r] += 1
                    out[r + 1] += 1
    return out


def cat_map_rate(A):
    tr = A[0][0] + A[1][1]
    return math.log((tr + math.sqrt(tr * tr - 4)) / 2)


def biinvariant_sectional(constants):
    """``K(e_i, e_j) = |[e_i, e_j]|^2 / 4`` for orthonormal ``e_i``."""
    n = constants.shape[0]
    return {(i, j): 0.25 * float(np.sum(np.asarray(constants[i, j], dtype=float) ** 2))
            for i, j in combinations(range(n), 2)}


def cyclic_graph_betti(ratio_holonomy):
    """Rank-1 local system on a cycle graph: H^0 = H^1 = 1 iff the monodromy is trivial."""
    trivial = abs(ratio_holonomy - 1.0) < 1e-12
    return (1, 1) if trivial else (0, 0)
