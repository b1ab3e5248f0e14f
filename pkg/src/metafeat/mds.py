"""Classical (Torgerson) multidimensional scaling."""

from __future__ import annotations

import csv
import warnings

import numpy as np


def classical_mds(points: np.ndarray, n_dims: int = 2) -> np.ndarray:
    """Coordinates whose Euclidean distances best match those of ``points``.

    Squared distances are double-centered; the top ``n_dims`` eigenvectors
    scaled by the square roots of their eigenvalues are the coordinates.
    Dimensions without a positive eigenvalue are zero-filled with a warning.
    """
    P = np.asarray(points, dtype=np.float64)
    n = len(P)
    sq = ((P[:, None, :] - P[None, :, :]) ** 2).sum(axis=2)
    J = np.eye(n) - np.full((n, n), 1.0 / n)
    B = -0.5 * J @ sq @ J
    evals, evecs = np.linalg.eigh((B + B.T) / 2)
    order = np.argsort(evals)[::-1][:n_dims]
    evals, evecs = evals[order], evecs[:, order]
    tol = 1e-10 * max(1.0, abs(evals).max() if len(evals) else 1.0)
    keep = evals > tol
    if keep.sum() < n_dims:
        warnings.warn(f"only {int(keep.sum())} positive eigenvalues; "
                      "remaining coordinates are zero", stacklevel=2)
    coords = np.zeros((n, n_dims))
    coords[:, :len(evals)][:, keep] = evecs[:, keep] * np.sqrt(evals[keep])
    # deterministic sign: largest-magnitude entry of each axis is positive
    for j in range(n_dims):
        col = coords[:, j]
        if col.any() and col[np.argmax(np.abs(col))] < 0:
            coords[:, j] = -col
    return coords


def write_embedding(names, coords: np.ndarray, labels, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["name", "x", "y", "label"])
        for name, (x, y), lab in zip(names, coords, labels):
            w.writerow([name, repr(float(x)), repr(float(y)), lab])
