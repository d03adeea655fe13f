"""Regenerate the bundled triangulations and their checksum manifest.

Run from the repository root: ``python3 scripts/generate_complexes.py``.
"""

import hashlib
import json
from itertools import combinations, permutations, product
from pathlib import Path

DATA = Path(__file__).resolve().parents[1] / "src" / "twistcoh" / "data"


def circle():
    return [(0, 1), (1, 2), (0, 2)]


def tetra_boundary():
    return list(combinations(range(4), 3))


def torus7():
    out = []
    for i in range(7):
        out.append((i, (i + 1) % 7, (i + 3) % 7))
        out.append((i, (i + 2) % 7, (i + 3) % 7))
    return out


def klein(n=4, m=4):
    """Grid triangulation of [0,n] x [0,m] with (i, m) ~ (-i, 0) and (n, j) ~ (0, j)."""

    def vid(i, j):
        if j == m:
            i, j = -i, 0
        return (i % n) * m + (j % m)

    out = []
    for i, j in product(range(n), range(m)):
        a, b, c, d = vid(i, j), vid(i + 1, j), vid(i, j + 1), vid(i + 1, j + 1)
        out += [(a, b, d), (a, c, d)]
    return out


def rp3():
    """Antipodal quotient of the barycentric subdivision of the 4-cross-polytope boundary."""
    faces = []
    for k in range(1, 5):
        for axes in combinations(range(4), k):
            for signs in product((1, -1), repeat=k):
                faces.append(frozenset(zip(axes, signs)))
    neg = {f: frozenset((i, -s) for i, s in f) for f in faces}
    classes, label = {}, {}
    for f in sorted(faces, key=lambda f: (len(f), sorted(f))):
        if f in label:
            continue
        label[f] = label[neg[f]] = len(classes)
        classes[len(classes)] = f
    facets = set()
    tops = [f for f in faces if len(f) == 4]
    for top in tops:
        for order in permutations(sorted(top)):
            chain = [frozenset(order[:r]) for r in range(1, 5)]
            facets.add(tuple(sorted(label[c] for c in chain)))
    return sorted(facets)


def main():
    DATA.mkdir(parents=True, exist_ok=True)
    manifest = {}
    for name, facets in [("circle3", circle()), ("tetrahedron_boundary", tetra_boundary()),
                         ("torus7", torus7()), ("klein_bottle", klein()), ("rp3", rp3())]:
        text = "".join(" ".join(map(str, sorted(f))) + "\n" for f in facets)
        (DATA / f"{name}.txt").write_text(text)
        manifest[name] = hashlib.sha256(text.encode()).hexdigest()
    (DATA / "checksums.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
