import numpy as np
import pytest

from twistcoh.modes import TrigPolynomial


def random_potential(rng, dim=2, bandwidth=1, amplitude=0.5, n_terms=2):
    """Real trigonometric polynomial with seeded random modes and amplitudes."""
    terms = []
    for _ in range(n_terms):
        mode = rng.integers(-bandwidth, bandwidth + 1, size=dim)
        if not mode.any():
            mode[0] = 1
        terms.append({"kind": str(rng.choice(["sin", "cos"])), "amplitude": float(rng.uniform(-amplitude, amplitude)),
                      "mode": mode.tolist()})
    return TrigPolynomial.from_terms(dim, terms)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
