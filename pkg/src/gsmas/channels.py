"""Fading channel generation and the CSI impairment models.

Channels are complex arrays of shape ``(..., n_rx, n_tx)``; every function
broadcasts over leading batch axes.  Randomness always comes from an explicit
``numpy.random.Generator`` so a seed fully determines the output.

Draw order is part of the contract: ``evolve_correlated`` draws the
innovation, ``estimate_with_error`` draws the error term, and
``imperfect_correlated_estimate`` draws the innovation first and then the
error.  With equal seeds the combined model therefore reproduces the
composition of the two single models.
"""

import numpy as np

from .config import ImpairmentParams
from .errors import ConfigError, NumericError

# Steering angles of the deterministic line-of-sight term.
_LOS_AOA = np.pi / 6
_LOS_AOD = np.pi / 4


def crandn(rng, shape):
    """Circularly-symmetric CN(0, 1) samples (variance split evenly over re/im)."""
    out = rng.standard_normal(tuple(shape) + (2,))
    return (out[..., 0] + 1j * out[..., 1]) * np.sqrt(0.5)


def los_component(n_rx, n_tx):
    """Unit-modulus planar-wave phase term of a half-wavelength ULA pair."""
    r = np.arange(n_rx)[:, None]
    t = np.arange(n_tx)[None, :]
    return np.exp(-1j * np.pi * (r * np.sin(_LOS_AOA) + t * np.sin(_LOS_AOD)))


def gen_channel(n_rx, n_tx, rician_k, rng, size=()):
    """Draw Rician channel matrices with unit average per-entry power.

    ``rician_k = 0`` is i.i.d. Rayleigh; ``rician_k = inf`` is the pure
    line-of-sight limit with ``|h| = 1`` everywhere.
    """
    if n_rx < 1 or n_tx < 1:
        raise ConfigError(f"channel dimensions must be >= 1, got {n_rx}x{n_tx}")
    if not rician_k >= 0:
        raise ConfigError(f"rician_k must be >= 0, got {rician_k}")
    size = (size,) if np.isscalar(size) else tuple(size)
    shape = size + (n_rx, n_tx)
    if np.isinf(rician_k):
        return np.broadcast_to(los_component(n_rx, n_tx), shape).copy()
    g = crandn(rng, shape)
    if rician_k == 0:
        return g
    w_los = np.sqrt(rician_k / (rician_k + 1.0))
    w_nlos = np.sqrt(1.0 / (rician_k + 1.0))
    return w_los * los_component(n_rx, n_tx) + w_nlos * g


def _check_ratio(name, v):
    if not (0.0 <= v <= 1.0):
        raise ConfigError(f"{name} must lie in [0, 1], got {v}")


def estimate_with_error(h, beta, rng):
    """Imperfect estimate sqrt(1-beta) H + sqrt(beta) e."""
    _check_ratio("beta", beta)
    h = np.asarray(h)
    e = crandn(rng, h.shape)
    return np.sqrt(1.0 - beta) * h + np.sqrt(beta) * e


def evolve_correlated(h_prev, alpha, rng):
    """First-order Gauss-Markov step sqrt(alpha) H_prev + sqrt(1-alpha) z."""
    _check_ratio("alpha", alpha)
    h_prev = np.asarray(h_prev)
    z = crandn(rng, h_prev.shape)
    return np.sqrt(alpha) * h_prev + np.sqrt(1.0 - alpha) * z


def imperfect_correlated_estimate(h_prev, params: ImpairmentParams, rng):
    """Estimate of the current channel from the channel ``iota`` steps back."""
    a, b = params.alpha, params.beta
    h_prev = np.asarray(h_prev)
    z = crandn(rng, h_prev.shape)
    e = crandn(rng, h_prev.shape)
    return (
        np.sqrt((1.0 - b) * a) * h_prev
        + np.sqrt((1.0 - a) * (1.0 - b)) * z
        + np.sqrt(b) * e
    )


def noise_variance(snr_db, signal_power=1.0):
    return signal_power / 10.0 ** (snr_db / 10.0)


def awgn(signal, snr_db, signal_power, rng):
    """Add complex white Gaussian noise at ``snr_db`` relative to ``signal_power``.

    ``snr_db = inf`` is the noise-free case and returns a copy of the input.
    """
    signal = np.asarray(signal, dtype=complex)
    if signal.size == 0:
        raise ConfigError("signal must be nonempty")
    if not signal_power > 0:
        raise ConfigError(f"signal_power must be > 0, got {signal_power}")
    if np.isnan(snr_db) or not np.all(np.isfinite(signal)):
        raise NumericError("awgn received non-finite input")
    if np.isposinf(snr_db):
        return signal.copy()
    sigma = np.sqrt(noise_variance(snr_db, signal_power))
    return signal + sigma * crandn(rng, signal.shape)


class ChannelProcess:
    """True channel sequence H_0, H_1, ... evolving per the time-correlated model.

    Entry ``nu`` relates to entry ``nu - iota`` by ``evolve_correlated``; the
    first ``max(iota, 1)`` entries are fresh stationary draws.  ``history``
    keeps the most recent ``depth`` matrices, oldest first.
    """

    def __init__(self, n_rx, n_tx, params: ImpairmentParams, rng, depth=1):
        self.n_rx, self.n_tx = n_rx, n_tx
        self.params = params
        self.rng = rng
        self.depth = max(depth, params.iota + 1)
        self.history = []

    def advance(self):
        lag = self.params.iota
        if lag == 0:
            # zero offset: the channel is its own reference, no evolution
            h = self.history[-1] if self.history else self._fresh()
        elif len(self.history) < lag:
            h = self._fresh()
        else:
            h = evolve_correlated(self.history[-lag], self.params.alpha, self.rng)
        self.history.append(h)
        del self.history[: -self.depth]
        return h

    def _fresh(self):
        return gen_channel(self.n_rx, self.n_tx, self.params.rician_k, self.rng)

    def back(self, steps):
        """Channel ``steps`` blocks before the most recent one."""
        return self.history[-1 - steps]


def episode_batch(n_rx, n_tx, params: ImpairmentParams, length, rng, n):
    """``n`` independent stretches of the channel process, shape (n, length, n_rx, n_tx).

    Each stretch starts from stationary draws, so the batch is equivalent to
    sampling ``length`` consecutive channels from a long realisation.
    """
    lag = params.iota
    out = np.empty((n, length, n_rx, n_tx), dtype=complex)
    for t in range(length):
        if lag == 0 and t > 0:
            out[:, t] = out[:, t - 1]
        elif t < max(lag, 1):
            out[:, t] = gen_channel(n_rx, n_tx, params.rician_k, rng, size=n)
        else:
            out[:, t] = evolve_correlated(out[:, t - lag], params.alpha, rng)
    return out
