"""Latency coding of values in [0, 1] and decoding of output fire times.

A spike list is a float array of fire times, one entry per input unit, with
``NO_SPIKE`` (``inf``) for silent units. That encoding keeps "at most one
spike per unit" structural.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError

NO_SPIKE = np.inf


@dataclass(frozen=True)
class EncoderConfig:
    exposition: float = 1.0

    def __post_init__(self):
        if not self.exposition > 0:
            raise ContractError("exposition must be > 0")


@dataclass(frozen=True)
class SpikeList:
    times: np.ndarray
    exposition: float = 1.0

    def __post_init__(self):
        t = self.times
        fired = np.isfinite(t)
        if np.any(np.isnan(t)) or np.any(t[fired] < 0) or np.any(t[fired] > self.exposition):
            raise ContractError("spike times must lie in [0, T] or be NO_SPIKE")

    @property
    def unit_count(self) -> int:
        return self.times.size

    @property
    def fired(self) -> np.ndarray:
        return np.isfinite(self.times)

    def events(self) -> tuple[np.ndarray, np.ndarray]:
        """(unit indices, times) of actual spikes in time order, ties by unit index."""
        flat = self.times.ravel()
        units = np.flatnonzero(np.isfinite(flat))
        order = np.argsort(flat[units], kind="stable")
        return units[order], flat[units[order]]


def split_channels(sample: np.ndarray) -> np.ndarray:
    """Scale to [-1, 1] by max(|min|, |max|), then stack positive and negative parts.

    ``(H, W, C)`` in, ``(H, W, 2C)`` out: channels ``0..C-1`` hold ``max(0, x)``
    and channels ``C..2C-1`` hold ``max(0, -x)``.
    """
    x = np.asarray(sample, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ContractError("sample has non-finite values")
    bound = np.max(np.abs(x)) if x.size else 0.0
    if bound > 0:
        x = x / bound
    return np.concatenate([np.maximum(x, 0.0), np.maximum(-x, 0.0)], axis=-1)


def split_images(images: np.ndarray) -> np.ndarray:
    """``split_channels`` applied to each image of an ``(n, H, W, C)`` stack."""
    images = np.asarray(images)
    bound = np.abs(images).reshape(len(images), -1).max(axis=1)
    bound = np.where(bound > 0, bound, 1.0).astype(images.dtype)[:, None, None, None]
    x = images / bound
    return np.concatenate([np.maximum(x, 0), np.maximum(-x, 0)], axis=-1)


def latency_times(values: np.ndarray, exposition: float = 1.0) -> np.ndarray:
    """Vectorised ``T (1 - x)`` with ``NO_SPIKE`` wherever ``x == 0``."""
    x = np.asarray(values, dtype=np.float64)
    return np.where(x > 0, exposition * (1.0 - x), NO_SPIKE)


def encode_latency(values: np.ndarray, cfg: EncoderConfig = EncoderConfig()) -> SpikeList:
    """One spike at ``T (1 - x)`` per unit with ``x > 0``; zeros stay silent."""
    x = np.asarray(values, dtype=np.float64)
    if np.any(~(x >= 0)) or np.any(x > 1):
        raise ContractError("latency coding expects values in [0, 1]")
    return SpikeList(latency_times(x, cfg.exposition).ravel(), cfg.exposition)


def decode_latency(fire_time, t_expected: float, cfg: EncoderConfig = EncoderConfig()):
    """``clip(1 - (t - t_exp) / (T - t_exp), 0, 1)``; silent neurons decode to 0.

    Accepts a scalar (``None`` or ``inf`` meaning no spike) or an array.
    """
    if not t_expected < cfg.exposition:
        raise ContractError("t_expected must be < exposition")
    if fire_time is None:
        return 0.0
    t = np.asarray(fire_time, dtype=np.float64)
    v = 1.0 - (t - t_expected) / (cfg.exposition - t_expected)
    v = np.where(np.isfinite(t), np.clip(v, 0.0, 1.0), 0.0)
    return float(v) if v.ndim == 0 else v
