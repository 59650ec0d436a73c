"""Error bars for correlated Markov chain output."""

import math

import numpy as np

from .errors import InsufficientDataError


def autocorr(x):
    """Normalized autocorrelation function of a 1D series, via FFT."""
    x = np.asarray(x, dtype=float)
    n = x.size
    y = x - x.mean()
    f = np.fft.rfft(y, n=2 * n)
    acf = np.fft.irfft(f * np.conj(f))[:n]
    if acf[0] <= 0:
        return np.ones(1)
    return acf / acf[0]


def integrated_time(x, c=5.0):
    """Integrated autocorrelation time with Sokal's automatic window.

    The window is the smallest M with M >= c * tau(M). Returns at least 1.
    """
    x = np.asarray(x, dtype=float)
    if x.size < 4:
        return 1.0
    rho = autocorr(x)
    taus = 2.0 * np.cumsum(rho) - 1.0
    m = np.arange(taus.size)
    ok = m >= c * taus
    M = int(np.argmax(ok)) if np.any(ok) else taus.size - 1
    return max(1.0, float(taus[M]))


def effective_sample_size(x):
    x = np.asarray(x, dtype=float)
    return x.size / integrated_time(x)


def batch_means(x, n_batches=20):
    """Mean and batch-means standard error of a correlated series.

    Raises
    ------
    InsufficientDataError
        Fewer than two samples per batch.
    """
    x = np.asarray(x, dtype=float)
    if n_batches < 2 or x.size < 2 * n_batches:
        raise InsufficientDataError(f"need at least {2 * n_batches} samples for {n_batches} batches, got {x.size}")
    b = x.size // n_batches
    means = x[: b * n_batches].reshape(n_batches, b).mean(axis=1)
    return float(x.mean()), float(means.std(ddof=1) / math.sqrt(n_batches))


def variance_se(x, n_batches=20):
    """Sample variance with a batch-means standard error."""
    x = np.asarray(x, dtype=float)
    m = x.mean()
    _, se = batch_means((x - m) ** 2, n_batches)
    return float(x.var(ddof=1)), se
