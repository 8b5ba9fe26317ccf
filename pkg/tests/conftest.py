import numpy as np
import pytest

from bbmlab import fields


def random_trig_field(d: int, seed: int, terms: int = 3) -> fields.AnalyticField:
    """Seeded smooth field: a short random Fourier sum with exact gradient."""
    rng = np.random.default_rng(seed)
    ks = rng.normal(size=(terms, d))
    amps = rng.normal(size=terms) / terms
    phases = rng.uniform(0, 2 * np.pi, terms)

    def ev(pts):
        return sum(a * np.sin(pts @ k + c)
                   for a, k, c in zip(amps, ks, phases))

    def gr(pts):
        return sum(a * np.cos(pts @ k + c)[:, None] * k[None, :]
                   for a, k, c in zip(amps, ks, phases))

    return fields.AnalyticField(d, ev, gr, label=f"trig(seed={seed})")


def scaled_bump(scale: float = 0.5, support: float = 6.0) -> fields.AnalyticField:
    """scale * exp(-x^2) on the line, truncated where it is ~1e-16."""
    return fields.AnalyticField(
        1,
        lambda q: scale * np.exp(-q[:, 0] ** 2),
        lambda q: -2.0 * scale * q * np.exp(-q[:, 0] ** 2)[:, None],
        support_radius=support,
        label="scaled-bump",
    )


@pytest.fixture
def rng():
    return np.random.default_rng(2024)
