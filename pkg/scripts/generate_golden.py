"""Write the T^3_A golden dimensions from closed-form Fourier multipliers.

Independent of the package solver: on ``f(t) e^S`` the twisted basic
differential acts by ``2 pi i n - sum_{j in S} mu_j - c``, and every
vanishing multiplier pairs a class in degree ``|S|`` with one in ``|S|+1``.

Run from the repository root: ``python3 scripts/generate_golden.py``.
"""

import json
import math
from itertools import combinations
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "twistcoh" / "data" / "golden_t3a.json"
A = [[2, 1], [1, 1]]


def dims(mu, c, n_max=32):
    q = len(mu) + 1
    out = [0] * (q + 1)
    for r in range(q):
        for S in combinations(mu, r):
            for n in range(-n_max, n_max + 1):
                if abs(complex(-sum(S) - c, 2 * math.pi * n)) < 1e-9:
                    out[r] += 1
                    out[r + 1] += 1
    return out


def main():
    tr = A[0][0] + A[1][1]
    lam1 = (tr + math.sqrt(tr * tr - 4)) / 2
    mu = [math.log(lam1)]
    ln_lam2 = -mu[0]
    entries = [
        {"label": "0", "c": "0", "dims": dims(mu, 0.0)},
        {"label": "ln_lambda2", "c": "ln_lambda2", "dims": dims(mu, ln_lam2)},
        {"label": "1", "c": "1", "dims": dims(mu, 1.0)},
    ]
    doc = {"model": {"matrix": A}, "entries": entries, "source": "closed-form multiplier count"}
    OUT.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(OUT, [e["dims"] for e in entries])


if __name__ == "__main__":
    main()
