"""Dataset loading and preparation: CSV, IDX, synthetic sets, scaling, PCA, folds."""
from __future__ import annotations

import csv
import logging
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

log = logging.getLogger(__name__)

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    class_count: int

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("features and labels disagree on sample count")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.class_count):
            raise ValueError(f"labels must lie in [0, {self.class_count})")

    def __len__(self):
        return self.labels.shape[0]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx], self.class_count)

    def with_features(self, features) -> "Dataset":
        return Dataset(features, self.labels, self.class_count)


# --- loaders ---------------------------------------------------------------


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def load_csv(path, feature_columns: Optional[Sequence[int]] = None, label_column: int = -1) -> Dataset:
    """Numeric CSV; a non-numeric first row is treated as a header.

    Labels may be any tokens; they are mapped to 0..c-1 in sorted order
    (numerically when all labels are numbers).
    """
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if lineno == 1 and not all(_is_number(c) for c in row):
                continue
            rows.append((lineno, [c.strip() for c in row]))
    if not rows:
        raise ValueError(f"{path}: no data rows")
    width = len(rows[0][1])
    label_idx = label_column % width if -width <= label_column < width else None
    if label_idx is None:
        raise ValueError(f"{path}: label column {label_column} missing (rows have {width} columns)")
    if feature_columns is None:
        feature_columns = [i for i in range(width) if i != label_idx]
    for c in feature_columns:
        if not -width <= c < width:
            raise ValueError(f"{path}: feature column {c} missing (rows have {width} columns)")
    feats, raw_labels = [], []
    for lineno, row in rows:
        if len(row) != width:
            raise ValueError(f"{path}:{lineno}: expected {width} columns, found {len(row)}")
        try:
            feats.append([float(row[c]) for c in feature_columns])
        except ValueError:
            raise ValueError(f"{path}:{lineno}: non-numeric feature value") from None
        raw_labels.append(row[label_idx])
    if all(_is_number(v) for v in raw_labels):
        keys = sorted(set(raw_labels), key=float)
    else:
        keys = sorted(set(raw_labels))
    lookup = {k: i for i, k in enumerate(keys)}
    return Dataset(np.array(feats), np.array([lookup[v] for v in raw_labels]), len(keys))


def _read_idx(path, magic: int):
    blob = Path(path).read_bytes()
    if len(blob) < 4:
        raise ValueError(f"{path}: truncated IDX header")
    (got,) = struct.unpack(">I", blob[:4])
    if got != magic:
        raise ValueError(f"{path}: magic 0x{got:08x}, expected 0x{magic:08x}")
    ndim = magic & 0xFF
    if len(blob) < 4 + 4 * ndim:
        raise ValueError(f"{path}: truncated IDX header")
    dims = struct.unpack(f">{ndim}I", blob[4 : 4 + 4 * ndim])
    size = int(np.prod(dims))
    body = blob[4 + 4 * ndim :]
    if len(body) != size:
        raise ValueError(f"{path}: expected {size} data bytes, found {len(body)}")
    return np.frombuffer(body, dtype=np.uint8).reshape(dims)


def load_idx(images_path, labels_path) -> Dataset:
    images = _read_idx(images_path, IDX_IMAGES_MAGIC)
    labels = _read_idx(labels_path, IDX_LABELS_MAGIC)
    if images.shape[0] != labels.shape[0]:
        raise ValueError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    x = images.astype(np.float64)[:, None, :, :] / 255.0
    return Dataset(x, labels.astype(np.int64), int(labels.max()) + 1 if labels.size else 1)


def write_idx(images_path, labels_path, images: np.ndarray, labels: np.ndarray):
    """Inverse of :func:`load_idx` for uint8 images ``(N, H, W)``."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    n, h, w = images.shape
    Path(images_path).write_bytes(struct.pack(">IIII", IDX_IMAGES_MAGIC, n, h, w) + images.tobytes())
    Path(labels_path).write_bytes(struct.pack(">II", IDX_LABELS_MAGIC, n) + labels.tobytes())


# --- scaling ---------------------------------------------------------------


def minmax(x, lo=None, hi=None):
    """Scale each column into [0, 1]; constant columns map to 0."""
    x = np.asarray(x, dtype=np.float64)
    lo = x.min(axis=0) if lo is None else lo
    hi = x.max(axis=0) if hi is None else hi
    span = np.where(hi - lo > 0, hi - lo, 1.0)
    return (x - lo) / span


def standardize(x, mean=None, std=None):
    x = np.asarray(x, dtype=np.float64)
    mean = x.mean(axis=0) if mean is None else mean
    std = x.std(axis=0) if std is None else std
    return (x - mean) / np.where(std > 0, std, 1.0)


# --- PCA -------------------------------------------------------------------


def jacobi_eigh(a: np.ndarray, tol: float = 1e-14, max_sweeps: int = 100):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(values, vectors)`` sorted by descending eigenvalue, with
    ``vectors[:, i]`` the i-th eigenvector.
    """
    a = np.array(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("square matrix expected")
    if not np.allclose(a, a.T, atol=1e-12 * max(1.0, np.abs(a).max(initial=0.0))):
        raise ValueError("matrix is not symmetric")
    n = a.shape[0]
    v = np.eye(n)
    scale = max(np.linalg.norm(a), 1e-300)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.triu(a, 1) ** 2))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # A <- J^T A J on rows/cols p, q
                ap, aq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap, aq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    vals = np.diag(a).copy()
    order = np.argsort(-vals, kind="stable")
    return vals[order], v[:, order]


@dataclass
class PCAModel:
    mean: np.ndarray
    components: np.ndarray  # (D, k), orthonormal columns
    explained_variance: np.ndarray

    def transform(self, x):
        return (np.asarray(x, dtype=np.float64) - self.mean) @ self.components


def fit_pca(x, target_dims: int = 7) -> PCAModel:
    x = np.asarray(x, dtype=np.float64)
    n, d = x.shape
    if n < 2:
        raise ValueError("PCA needs at least 2 samples")
    if d < target_dims:
        raise ValueError(f"cannot reduce {d} features to {target_dims}")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / (n - 1)
    vals, vecs = jacobi_eigh(cov)
    rank = int(np.sum(vals > 1e-12 * max(vals[0], 1e-300)))
    k = target_dims
    if rank < target_dims:
        warnings.warn(f"covariance rank {rank} < {target_dims}; keeping {rank} components")
        k = max(rank, 1)
    vecs = vecs[:, :k]
    # sign convention: largest-magnitude loading of each component is positive
    flip = np.sign(vecs[np.argmax(np.abs(vecs), axis=0), np.arange(k)])
    vecs = vecs * np.where(flip == 0, 1.0, flip)
    return PCAModel(mean, vecs, vals[:k])


def pca_reduce(dataset: Dataset, target_dims: int = 7) -> Dataset:
    model = fit_pca(dataset.features, target_dims)
    return dataset.with_features(model.transform(dataset.features))


# --- splitting -------------------------------------------------------------


def stratified_kfold(labels, k: int = 5, seed: int = 0) -> List[np.ndarray]:
    """``k`` disjoint index arrays; each class is dealt round-robin after shuffling."""
    labels = np.asarray(labels.labels if isinstance(labels, Dataset) else labels).reshape(-1)
    if k < 2:
        raise ValueError("k must be >= 2 to leave a held-out fold")
    rng = np.random.default_rng(seed)
    folds: List[list] = [[] for _ in range(k)]
    offset = 0
    for c in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == c))
        if idx.size < k:
            raise ValueError(f"class {c} has {idx.size} samples, fewer than k = {k}")
        for j, i in enumerate(idx):
            folds[(j + offset) % k].append(i)
        offset += idx.size
    return [np.sort(np.array(f, dtype=np.int64)) for f in folds]


def train_test_split(dataset: Dataset, test_fold: int = 0, k: int = 5, seed: int = 0):
    """Stratified split holding out one of ``k`` folds (k = 5 gives 4:1)."""
    folds = stratified_kfold(dataset.labels, k, seed)
    test_idx = folds[test_fold % k]
    train_idx = np.sort(np.concatenate([f for i, f in enumerate(folds) if i != test_fold % k]))
    return dataset.subset(train_idx), dataset.subset(test_idx)


# --- synthetic data --------------------------------------------------------


def _balanced_labels(n, c, rng):
    labels = np.arange(n) % c
    return rng.permutation(labels)


def make_blobs(n: int, dims: int = 7, classes: int = 2, separation: float = 4.0, seed: int = 0) -> Dataset:
    """Unit-sigma Gaussian blobs; each centre lies ``separation`` sigma from the origin.

    Centres point along orthonormal random directions, so two centres are
    ``sqrt(2) * separation`` apart.
    """
    if n < classes:
        raise ValueError("n must be >= number of classes")
    rng = np.random.default_rng(seed)
    labels = _balanced_labels(n, classes, rng)
    basis, _ = np.linalg.qr(rng.normal(size=(dims, dims)))
    centres = np.zeros((classes, dims))
    for c in range(classes):
        centres[c] = basis[:, c % dims] * separation * (1 + c // dims)
    x = centres[labels] + rng.normal(size=(n, dims))
    return Dataset(x, labels, classes)


def make_moons(n: int, noise: float = 0.1, seed: int = 0) -> Dataset:
    rng = np.random.default_rng(seed)
    labels = _balanced_labels(n, 2, rng)
    t = rng.uniform(0, np.pi, n)
    x = np.where(labels[:, None] == 0, np.c_[np.cos(t), np.sin(t)], np.c_[1 - np.cos(t), 0.5 - np.sin(t)])
    return Dataset(x + rng.normal(scale=noise, size=x.shape), labels, 2)


def _shape_image(kind: int, rng) -> np.ndarray:
    img = np.zeros((28, 28))
    yy, xx = np.mgrid[0:28, 0:28]
    # centred with +-1 px jitter, like size-normalized digit images
    cy, cx = 14 + rng.integers(-1, 2, size=2)
    r = rng.integers(5, 9)
    inten = rng.uniform(0.6, 1.0)
    if kind == 0:  # filled disc
        img[(yy - cy) ** 2 + (xx - cx) ** 2 <= r * r] = inten
    elif kind == 1:  # square outline
        box = (np.abs(yy - cy) <= r) & (np.abs(xx - cx) <= r)
        inner = (np.abs(yy - cy) <= r - 2) & (np.abs(xx - cx) <= r - 2)
        img[box & ~inner] = inten
    elif kind == 2:  # cross
        img[(np.abs(yy - cy) <= 1) & (np.abs(xx - cx) <= r)] = inten
        img[(np.abs(xx - cx) <= 1) & (np.abs(yy - cy) <= r)] = inten
    elif kind == 3:  # ring
        d2 = (yy - cy) ** 2 + (xx - cx) ** 2
        img[(d2 <= r * r) & (d2 >= (r - 2) ** 2)] = inten
    else:  # horizontal bars
        img[((yy - cy) % 4 < 2) & (np.abs(yy - cy) <= r) & (np.abs(xx - cx) <= r)] = inten
    return img


SHAPE_KINDS = 5


def make_shapes(n: int, classes: int = 2, seed: int = 0) -> Dataset:
    """28x28 grayscale images of simple shapes, one shape per class (up to 5)."""
    if not 2 <= classes <= SHAPE_KINDS:
        raise ValueError(f"shapes supports 2..{SHAPE_KINDS} classes")
    rng = np.random.default_rng(seed)
    labels = _balanced_labels(n, classes, rng)
    x = np.stack([_shape_image(int(c), rng) for c in labels])[:, None]
    return Dataset(x, labels, classes)


def make_synthetic(kind: str, n: int, seed: int = 0, **kw) -> Dataset:
    if kind == "blobs":
        return make_blobs(n, seed=seed, **kw)
    if kind == "moons":
        return make_moons(n, seed=seed, **kw)
    if kind == "shapes":
        return make_shapes(n, seed=seed, **kw)
    raise ValueError(f"unknown synthetic kind {kind!r}")
