"""Original-vs-reconstruction image metrics computed on the union of nonzero pixels."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2
LSD_FLOOR = 1e-8


@dataclass(frozen=True)
class MaskedPair:
    a: np.ndarray
    b: np.ndarray

    def __len__(self):
        return self.a.size


def mask_pair(a, b) -> MaskedPair:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    keep = (a != 0) | (b != 0)
    return MaskedPair(a[keep], b[keep])


def _nonempty(pair: MaskedPair):
    if len(pair) == 0:
        raise ValueError("metric undefined on an empty pair")


def cosine_distance(pair: MaskedPair) -> float:
    """1 - cosine similarity; NaN when either vector is zero."""
    na, nb = np.linalg.norm(pair.a), np.linalg.norm(pair.b)
    if na == 0 or nb == 0:
        return float("nan")
    sim = float(pair.a @ pair.b / (na * nb))
    return 1.0 - min(1.0, max(-1.0, sim))


def mse(pair: MaskedPair) -> float:
    _nonempty(pair)
    return float(np.mean((pair.a - pair.b) ** 2))


def ssim_global(pair: MaskedPair) -> float:
    _nonempty(pair)
    a, b = pair.a, pair.b
    ma, mb = a.mean(), b.mean()
    va, vb = a.var(), b.var()
    cov = np.mean((a - ma) * (b - mb))
    return float(((2 * ma * mb + SSIM_C1) * (2 * cov + SSIM_C2)) / ((ma**2 + mb**2 + SSIM_C1) * (va + vb + SSIM_C2)))


def dssim(pair: MaskedPair) -> float:
    s = min(1.0, max(0.0, ssim_global(pair)))
    return (1.0 - s) / 2.0


def lsd(pair: MaskedPair) -> float:
    _nonempty(pair)
    a = np.maximum(pair.a, LSD_FLOOR)
    b = np.maximum(pair.b, LSD_FLOOR)
    return float(np.sqrt(np.mean(np.log10(a / b) ** 2)))


METRICS = {"cosine": cosine_distance, "mse": mse, "dssim": dssim, "lsd": lsd}


def batch_metrics(originals, reconstructions) -> dict:
    """Mean of every metric over image pairs; undefined values are skipped."""
    originals = np.asarray(originals, dtype=np.float64)
    reconstructions = np.asarray(reconstructions, dtype=np.float64).reshape(originals.shape)
    values = {k: [] for k in METRICS}
    for x, r in zip(originals, reconstructions):
        pair = mask_pair(x, r)
        if len(pair) == 0:
            continue
        for k, fn in METRICS.items():
            values[k].append(fn(pair))
    out = {}
    for k, v in values.items():
        v = np.array(v, dtype=np.float64)
        out[k] = float(np.nanmean(v)) if np.any(~np.isnan(v)) else float("nan")
    return out
