"""GSM modem: antenna combinations, Gray QAM, bit mapping and ML detection.

A transmitted block carries ``spatial_bits`` bits selecting one of the
``2**spatial_bits`` antenna combinations of the active subset, followed by
``log2(M)`` bits selecting a QAM point.  Both fields are big-endian.
Constellation arrays are indexed by bit label, so ``qam_index`` is simply the
integer value of the modulation bits.
"""

import itertools
import math
from typing import NamedTuple

import numpy as np

from . import kernels
from .channels import awgn
from .config import MAX_COMBINATIONS, SUPPORTED_MOD_ORDERS
from .errors import ConfigError, FramingError


class GsmSymbol(NamedTuple):
    combo_index: int
    qam_index: int


def enumerate_combinations(n_tx, n_active):
    """All ``C(n_tx, n_active)`` activation masks, first ``[1,1,0,...]`` last ``[...,0,1,1]``.

    Returns an int8 array of shape (C, n_tx).
    """
    if not (1 <= n_active <= n_tx):
        raise ConfigError(f"need 1 <= n_active <= n_tx, got {n_active}, {n_tx}")
    c = math.comb(n_tx, n_active)
    if c > MAX_COMBINATIONS:
        raise ConfigError(f"{c} combinations exceed the supported maximum")
    masks = np.zeros((c, n_tx), dtype=np.int8)
    for row, active in enumerate(itertools.combinations(range(n_tx), n_active)):
        masks[row, list(active)] = 1
    return masks


def bpcu(config):
    """(maximum GSM rate without selection, rate with antenna selection)."""
    m = config.mod_order
    c = config.n_combinations
    maximum = math.floor(math.log2(m) + math.log2(c))
    return maximum, config.bits_per_symbol + config.spatial_bits


def _gray(n):
    return n ^ (n >> 1)


def qam_constellation(mod_order):
    """Gray-mapped square QAM with unit average energy, indexed by bit label.

    The first half of a label drives the in-phase level, the second half the
    quadrature level; each half is a Gray-coded PAM index.
    """
    if mod_order not in SUPPORTED_MOD_ORDERS:
        raise ConfigError(f"unsupported QAM order {mod_order}")
    k = int(math.log2(mod_order)) // 2
    side = 1 << k
    level = np.empty(side)
    for pos in range(side):
        level[_gray(pos)] = 2 * pos - (side - 1)
    labels = np.arange(mod_order)
    points = level[labels >> k] + 1j * level[labels & (side - 1)]
    return points / np.sqrt(2.0 * (mod_order - 1) / 3.0)


def _bits_to_int(bits):
    w = 1 << np.arange(bits.shape[-1] - 1, -1, -1)
    return (bits.astype(np.int64) * w).sum(axis=-1)


def _int_to_bits(values, width):
    shifts = np.arange(width - 1, -1, -1)
    return ((np.asarray(values)[..., None] >> shifts) & 1).astype(np.uint8)


def map_bits(bits, spatial_bits, mod_order):
    """Split a bit block into (combo_index, qam_index).

    Accepts one block of length ``spatial_bits + log2(mod_order)`` or a batch
    with blocks along the last axis; batches return arrays.
    """
    bits = np.asarray(bits)
    q = int(math.log2(mod_order))
    if bits.shape[-1:] != (spatial_bits + q,):
        raise FramingError(
            f"expected blocks of {spatial_bits + q} bits, got shape {bits.shape}"
        )
    if np.any((bits != 0) & (bits != 1)):
        raise FramingError("bit blocks may only contain 0 and 1")
    combo = _bits_to_int(bits[..., :spatial_bits]) if spatial_bits else np.zeros(bits.shape[:-1], np.int64)
    qam = _bits_to_int(bits[..., spatial_bits:])
    if bits.ndim == 1:
        return GsmSymbol(int(combo), int(qam))
    return GsmSymbol(combo, qam)


def demap(sym, spatial_bits, mod_order):
    """Inverse of :func:`map_bits`."""
    q = int(math.log2(mod_order))
    combo = _int_to_bits(sym.combo_index, spatial_bits)
    qam = _int_to_bits(sym.qam_index, q)
    return np.concatenate([combo, qam], axis=-1)


def modulate(sym, subset, constellation, normalize=True):
    """Transmit vector ``s * I^C``, scaled by 1/sqrt(N_u) when ``normalize``."""
    mask = np.asarray(subset)[sym.combo_index]
    s = constellation[sym.qam_index]
    if normalize:
        s = s / np.sqrt(mask.sum())
    return s * mask


def transmit(h, x, snr_db, rng):
    """Received vector y = H x + w; noise power is set against unit transmit power."""
    h = np.asarray(h)
    x = np.asarray(x)
    if h.shape[-1] != x.shape[-1]:
        raise ConfigError(f"channel {h.shape} and transmit vector {x.shape} disagree")
    y = np.einsum("...rt,...t->...r", h, x)
    return awgn(y, snr_db, 1.0, rng)


def effective_channels(h, masks, normalize=True):
    """Per-combination received signatures ``H I^C`` (optionally / sqrt(N_u)).

    ``masks`` has shape (..., S, n_tx); the result has shape (..., S, n_rx).
    Leading axes of ``h`` and ``masks`` broadcast.
    """
    masks = np.asarray(masks)
    g = np.einsum("...rt,...st->...sr", h, masks.astype(float))
    if normalize:
        g = g / np.sqrt(masks.sum(axis=-1, keepdims=True))
    return g


def ml_detect(y, h_est, subset, constellation, normalize=True):
    """Exhaustive ML detection over the subset's combinations and the constellation.

    Minimises sum_i |y_i - s h_i I^C|^2; ties go to the lowest
    (combo_index, qam_index).  ``y`` may be a batch (B, n_rx) with ``h_est``
    of shape (B, n_rx, n_tx) and ``subset`` of shape (S, n_tx) or (B, S, n_tx).
    """
    y = np.asarray(y, dtype=complex)
    g = effective_channels(np.asarray(h_est, dtype=complex), subset, normalize)
    single = y.ndim == 1
    if single:
        y, g = y[None], g[None]
    g = np.broadcast_to(g, (y.shape[0],) + g.shape[-2:])
    combo, qam = kernels.ml_detect_batch(
        np.ascontiguousarray(y), np.ascontiguousarray(g), np.asarray(constellation, dtype=complex)
    )
    if single:
        return GsmSymbol(int(combo[0]), int(qam[0]))
    return GsmSymbol(combo, qam)
