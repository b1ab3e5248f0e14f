"""Hand-crafted statistical meta-features (22-dimensional baseline)."""

from __future__ import annotations

import numpy as np

FEATURE_NAMES = (
    "log_n", "log_m", "n_classes",
    "class_prob_min", "class_prob_max", "class_prob_mean", "class_prob_std",
    "skew_min", "skew_max", "skew_mean", "skew_std",
    "kurt_min", "kurt_max", "kurt_mean", "kurt_std",
    "frac_abs_skew_gt_1",
    "mean_of_means", "std_of_means", "mean_of_vars", "std_of_vars",
    "class_entropy", "default_accuracy",
)
# log(N/M) is left out: it is log N - log M exactly.


def _moments(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-column sample skewness and excess kurtosis (population moments).

    Zero-variance columns get 0 for both.
    """
    mu = X.mean(axis=0)
    d = X - mu
    m2 = (d ** 2).mean(axis=0)
    m3 = (d ** 3).mean(axis=0)
    m4 = (d ** 4).mean(axis=0)
    ok = m2 > 1e-12
    skew = np.zeros(X.shape[1])
    kurt = np.zeros(X.shape[1])
    skew[ok] = m3[ok] / m2[ok] ** 1.5
    kurt[ok] = m4[ok] / m2[ok] ** 2 - 3.0
    return skew, kurt


def _summary(v: np.ndarray) -> list[float]:
    return [float(v.min()), float(v.max()), float(v.mean()), float(v.std())]


def engineered_mf(ds) -> np.ndarray:
    """Fixed-order vector of 22 statistics of a dataset or batch (anything
    with ``X`` and ``Y`` matrices).

    Order: log N, log M, T; class-probability min/max/mean/std;
    skewness min/max/mean/std; excess kurtosis min/max/mean/std; fraction of
    predictors with |skewness| > 1; mean/std of predictor means; mean/std of
    predictor variances; normalized class entropy; majority-class rate.
    """
    X = np.asarray(ds.X, dtype=np.float64)
    Y = np.asarray(ds.Y, dtype=np.float64)
    n, m = X.shape
    t = Y.shape[1]
    counts = Y.sum(axis=0)
    probs = counts / counts.sum() if counts.sum() > 0 else np.full(t, 1.0 / t)
    skew, kurt = _moments(X)
    nz = probs[probs > 0]
    entropy = float(-(nz * np.log(nz)).sum() / np.log(t)) if t > 1 else 0.0
    means = X.mean(axis=0)
    variances = X.var(axis=0)
    out = [np.log(n), np.log(m), float(t)]
    out += _summary(probs)
    out += _summary(skew)
    out += _summary(kurt)
    out += [float(np.mean(np.abs(skew) > 1.0))]
    out += [float(means.mean()), float(means.std()), float(variances.mean()),
            float(variances.std())]
    out += [entropy, float(probs.max())]
    return np.array(out, dtype=np.float64)
