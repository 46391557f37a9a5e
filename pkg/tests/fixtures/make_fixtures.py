"""Regenerates the small data files in this directory (python3 make_fixtures.py)."""
from pathlib import Path

import numpy as np

from hqsl import dataio

HERE = Path(__file__).parent


def main():
    rng = np.random.default_rng(2024)
    shapes = dataio.make_shapes(10, classes=2, seed=5)
    imgs = np.round(shapes.features[:, 0] * 255).astype(np.uint8)
    imgs[0, 0, 0] = 255  # one saturated pixel for the scaling check
    dataio.write_idx(HERE / "tiny-images.idx", HERE / "tiny-labels.idx", imgs, shapes.labels)

    # 1000-row, 7-feature binary table with a header row
    blobs = dataio.make_blobs(1000, dims=7, classes=2, separation=2.0, seed=11)
    x = blobs.features * rng.uniform(0.5, 3.0, size=7) + rng.uniform(-5, 5, size=7)
    with open(HERE / "features7.csv", "w") as fh:
        fh.write(",".join([f"f{i}" for i in range(7)] + ["label"]) + "\n")
        for row, y in zip(x, blobs.labels):
            fh.write(",".join(f"{v:.6f}" for v in row) + f",{y}\n")


if __name__ == "__main__":
    main()
