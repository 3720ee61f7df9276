"""Toy patch datasets from bundled freely licensed images."""

import numpy as np

PATCH = 33


def _source_images():
    from skimage import data

    return [data.camera(), data.coins(), data.moon()]


def image_patches(limit=None, stride=PATCH, seed=0):
    """Non-overlapping 33x33 grayscale patches in [0, 1].

    Patches are extracted from the scikit-image sample images, shuffled
    deterministically, and optionally truncated to ``limit``.
    """
    patches = []
    for img in _source_images():
        arr = np.asarray(img, dtype=np.float64) / 255.0
        h, w = arr.shape
        for i in range(0, h - PATCH + 1, stride):
            for j in range(0, w - PATCH + 1, stride):
                patches.append(arr[i:i + PATCH, j:j + PATCH])
    patches = np.stack(patches)
    rng = np.random.default_rng(seed)
    patches = patches[rng.permutation(len(patches))]
    if limit is not None:
        patches = patches[:limit]
    return patches


def synthetic_patches(count, seed=0):
    """Procedural smooth-plus-texture patches in [0, 1] (no image deps)."""
    rng = np.random.default_rng(seed)
    yy, xx = np.meshgrid(np.linspace(0, 1, PATCH), np.linspace(0, 1, PATCH),
                         indexing="ij")
    out = np.empty((count, PATCH, PATCH))
    for k in range(count):
        img = np.zeros((PATCH, PATCH))
        for _ in range(3):
            cx, cy = rng.uniform(0, 1, 2)
            sx, sy = rng.uniform(0.05, 0.4, 2)
            img += rng.uniform(0.2, 1.0) * np.exp(
                -((xx - cx) ** 2 / (2 * sx ** 2)
                  + (yy - cy) ** 2 / (2 * sy ** 2)))
        img += 0.2 * np.sin(2 * np.pi * rng.uniform(1, 4) * xx
                            + rng.uniform(0, 2 * np.pi))
        img -= img.min()
        peak = img.max()
        if peak > 0:
            img /= peak
        out[k] = img
    return out


def split(patches, val_fraction=0.2):
    n_val = max(1, int(len(patches) * val_fraction))
    return patches[n_val:], patches[:n_val]


def vectorize(patches):
    return patches.reshape(len(patches), -1)
