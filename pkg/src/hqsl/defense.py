"""Laplace noise on smashed data, and the fidelity analytics that go with it.

Encoding gates are 2*pi-periodic in their angle, so noise centred on a
multiple of 2*pi barely moves a quantum front while it wrecks a classical one.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

SWEEP_MU_OVER_PI = (0, 1, 2, 3, 4)
SWEEP_B = (0.01, 0.1, 0.5, 1.0)


@dataclass(frozen=True)
class LaplaceNoiseConfig:
    mu: float
    b: float
    seed: int = 0

    def __post_init__(self):
        if not self.b > 0:
            raise ValueError("Laplace scale b must be > 0")

    @classmethod
    def from_mu_over_pi(cls, mu_over_pi: float, b: float, seed: int = 0):
        return cls(mu_over_pi * np.pi, b, seed)

    def for_batch(self, batch_index: int) -> "LaplaceNoiseConfig":
        """Independent stream for one inference batch (seed xor batch index)."""
        return LaplaceNoiseConfig(self.mu, self.b, self.seed ^ int(batch_index))


def _laplace(mu, b, u):
    return mu - b * np.sign(u) * np.log1p(-2.0 * np.abs(u))


def sample(config: LaplaceNoiseConfig, count, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Inverse-CDF Laplace draws; ``count`` may be an int or a shape."""
    if np.ndim(count) == 0 and int(count) < 1:
        raise ValueError("count must be >= 1")
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    u = rng.uniform(-0.5, 0.5, size=count)
    # uniform() is half-open, so -0.5 can occur and would give log(0)
    u = np.maximum(u, np.nextafter(-0.5, 0.0))
    return _laplace(config.mu, config.b, u)


def apply_noise(z, config: LaplaceNoiseConfig, batch_index: Optional[int] = None) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    cfg = config if batch_index is None else config.for_batch(batch_index)
    return z + sample(cfg, z.shape)


def expected_fidelity(mu: float, b: float) -> float:
    """E[cos^2(eta/2)] for eta ~ Laplace(mu, b): (1 + cos(mu) / (1 + b^2)) / 2."""
    if b < 0:
        raise ValueError("b must be >= 0")
    return 0.5 * (1.0 + np.cos(mu) / (1.0 + b * b))


def fidelity_monte_carlo(mu: float, b: float, n: int = 100_000, seed: int = 0) -> Tuple[float, float]:
    """Sample mean of cos^2(eta/2) and its standard error."""
    f = np.cos(sample(LaplaceNoiseConfig(mu, b, seed), n) / 2.0) ** 2
    return float(f.mean()), float(f.std(ddof=1) / np.sqrt(n))


def sweep_grid() -> List[Tuple[float, float]]:
    return [(m * np.pi, b) for m in SWEEP_MU_OVER_PI for b in SWEEP_B]


def mean_output_shift(layer, z, config: LaplaceNoiseConfig) -> float:
    """Mean over rows of max |layer(z + eta) - layer(z)|."""
    z = np.asarray(z, dtype=np.float64)
    clean = layer.forward(z)
    noisy = layer.forward(apply_noise(z, config))
    return float(np.abs(noisy - clean).max(axis=1).mean())
