"""Single-layer convolutional SNN: IF neurons, multiplicative STDP, WTA homeostasis.

Two code paths compute the same dynamics:

* ``simulate`` / ``wta_train_step``: plain numpy, one event at a time. These
  are the readable definitions and the oracles in the test-suite.
* ``train`` / ``infer_conv``: numba kernels over many presentations, used by
  the pipeline. They accumulate potentials in the same order as the
  reference path, so their fire times agree exactly.

Weights rows use the HWC patch layout of ``datasets.PATCH_LAYOUT`` over the
split (2C-channel) input.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, asdict

import numba
import numpy as np

from .containers import read_container, write_container
from .errors import ContractError, FormatError, ShapeError
from .spike_coding import NO_SPIKE, EncoderConfig, SpikeList, decode_latency, latency_times

log = logging.getLogger(__name__)

THRESHOLD_FLOOR_FRACTION = 0.001


@dataclass(frozen=True)
class NeuronConfig:
    capacitance: float = 1.0
    v_rest: float = 0.0
    threshold_init_mean: float = 10.0
    threshold_init_std: float = 0.1

    def __post_init__(self):
        if not self.capacitance > 0:
            raise ContractError("capacitance must be > 0")
        if not self.threshold_init_mean > self.v_rest:
            raise ContractError("threshold_init_mean must exceed v_rest")
        if self.threshold_init_std < 0:
            raise ContractError("threshold_init_std must be >= 0")

    @property
    def threshold_floor(self) -> float:
        return THRESHOLD_FLOOR_FRACTION * self.threshold_init_mean


@dataclass(frozen=True)
class StdpConfig:
    lr_init: float = 0.1
    beta: float = 1.0
    w_min: float = 0.0
    w_max: float = 1.0
    ltp_window: float = 1.0

    def __post_init__(self):
        if not self.w_min < self.w_max:
            raise ContractError("w_min must be < w_max")
        if not self.lr_init > 0:
            raise ContractError("STDP lr_init must be > 0")
        if not self.ltp_window > 0:
            raise ContractError("ltp_window must be > 0")


@dataclass(frozen=True)
class HomeostasisConfig:
    lr_init: float = 1.0
    t_expected: float = 0.97
    # winner also takes the -lr_th/N share, so a lone neuron feels only the timing term
    winner_decay: bool = False

    def __post_init__(self):
        if not self.lr_init >= 0:
            raise ContractError("threshold lr_init must be >= 0")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    annealing: float = 0.95
    patches_per_epoch: int | None = None  # None: one patch per training image
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ContractError("epochs must be >= 1")
        if not 0 < self.annealing <= 1:
            raise ContractError("annealing must lie in (0, 1]")
        if self.patches_per_epoch is not None and self.patches_per_epoch < 0:
            raise ContractError("patches_per_epoch must be >= 0")


def check_homeostasis(homeo: HomeostasisConfig, encoder: EncoderConfig) -> None:
    if not 0 < homeo.t_expected < encoder.exposition:
        raise ContractError("t_expected must lie in (0, T)")


@dataclass
class SnnLayer:
    weights: np.ndarray     # (filter_count, patch_h * patch_w * channels)
    thresholds: np.ndarray  # (filter_count,)
    patch_w: int
    patch_h: int
    channels: int
    neuron: NeuronConfig = field(default_factory=NeuronConfig)
    stdp: StdpConfig = field(default_factory=StdpConfig)

    def __post_init__(self):
        if self.weights.shape != (len(self.thresholds), self.input_size):
            raise ShapeError(f"weights {self.weights.shape} do not match "
                             f"{len(self.thresholds)} x {self.input_size}")

    @property
    def filter_count(self) -> int:
        return len(self.thresholds)

    @property
    def input_size(self) -> int:
        return self.patch_w * self.patch_h * self.channels

    def copy(self) -> SnnLayer:
        return SnnLayer(self.weights.copy(), self.thresholds.copy(), self.patch_w, self.patch_h,
                        self.channels, self.neuron, self.stdp)

    def filters(self) -> np.ndarray:
        """Weights as ``(filter_count, patch_h, patch_w, channels)``."""
        return self.weights.reshape(self.filter_count, self.patch_h, self.patch_w, self.channels)


def init_layer(filter_count: int, patch_w: int, patch_h: int, channels: int, seed: int,
               neuron: NeuronConfig = NeuronConfig(), stdp: StdpConfig = StdpConfig()) -> SnnLayer:
    """Weights ~ U(w_min, w_max), thresholds ~ N(mean, std) clamped to the floor."""
    if filter_count < 1:
        raise ContractError("filter_count must be >= 1")
    rng = np.random.default_rng(seed)
    weights = rng.uniform(stdp.w_min, stdp.w_max, size=(filter_count, patch_h * patch_w * channels))
    thresholds = rng.normal(neuron.threshold_init_mean, neuron.threshold_init_std, size=filter_count)
    thresholds = np.maximum(thresholds, neuron.threshold_floor)
    return SnnLayer(weights, thresholds, patch_w, patch_h, channels, neuron, stdp)


# -- reference dynamics -------------------------------------------------------

def simulate(layer: SnnLayer, spikes: SpikeList) -> np.ndarray:
    """Event-driven IF integration of one presentation, no lateral inhibition.

    Returns the fire time of every neuron (``NO_SPIKE`` when it stays silent).
    Potentials start at ``v_rest``; each input spike adds ``w / C_m``.
    """
    if spikes.unit_count != layer.input_size:
        raise ShapeError(f"{spikes.unit_count} input units for a layer expecting {layer.input_size}")
    potential = np.full(layer.filter_count, layer.neuron.v_rest)
    fire = np.full(layer.filter_count, NO_SPIKE)
    inv_cap = 1.0 / layer.neuron.capacitance
    units, times = spikes.events()
    for u, t in zip(units, times):
        silent = ~np.isfinite(fire)
        potential[silent] += layer.weights[silent, u] * inv_cap
        fire[silent & (potential >= layer.thresholds)] = t
        if np.all(np.isfinite(fire)):
            break
    return fire


def stdp_update(cfg: StdpConfig, lr: float, w, t_pre, t_post: float):
    """Multiplicative STDP for one post spike; works on scalars or arrays.

    ``t_pre`` may be ``None`` or ``NO_SPIKE`` for a silent input, which falls
    in the depression branch. The result is clamped to ``[w_min, w_max]``.
    """
    w = np.asarray(w, dtype=np.float64)
    pre = np.asarray(NO_SPIKE if t_pre is None else t_pre, dtype=np.float64)
    span = cfg.w_max - cfg.w_min
    ltp = np.isfinite(pre) & (pre <= t_post) & (t_post - pre <= cfg.ltp_window)
    dw = np.where(ltp,
                  lr * np.exp(-cfg.beta * (w - cfg.w_min) / span),
                  -lr * np.exp(-cfg.beta * (cfg.w_max - w) / span))
    out = np.clip(w + dw, cfg.w_min, cfg.w_max)
    return float(out) if out.ndim == 0 else out


def wta_train_step(layer: SnnLayer, spikes: SpikeList, homeo: HomeostasisConfig,
                   lr_w: float, lr_th: float) -> int | None:
    """One competitive learning step; updates ``layer`` in place.

    The earliest neuron to fire wins (lowest index on ties) and alone applies
    STDP. Thresholds then move by ``+lr_th`` for the winner, ``-lr_th/N`` for
    the others (the winner too with ``homeo.winner_decay``), and
    ``-lr_th (t_win - t_expected)`` for everyone. With no winner every
    threshold drops by ``lr_th/N``. Returns the winner index.
    """
    fire = simulate(layer, spikes)
    n = layer.filter_count
    if not np.any(np.isfinite(fire)):
        layer.thresholds -= lr_th / n
    else:
        winner = int(np.argmin(fire))
        t_win = fire[winner]
        layer.weights[winner] = stdp_update(layer.stdp, lr_w, layer.weights[winner], spikes.times, t_win)
        step = np.full(n, -lr_th / n)
        step[winner] = lr_th - (lr_th / n if homeo.winner_decay else 0.0)
        layer.thresholds += step
        layer.thresholds -= lr_th * (t_win - homeo.t_expected)
        np.maximum(layer.thresholds, layer.neuron.threshold_floor, out=layer.thresholds)
        return winner
    np.maximum(layer.thresholds, layer.neuron.threshold_floor, out=layer.thresholds)
    return None


def repeat_presentation(layer: SnnLayer, spikes: SpikeList, homeo: HomeostasisConfig, count: int,
                        lr_w: float = 0.0, lr_th: float | None = None) -> np.ndarray:
    """Present the same input ``count`` times; returns the winner time per step.

    Steps without a winner give ``NO_SPIKE``. ``lr_w = 0`` freezes the weights
    so only the threshold dynamics act.
    """
    lr_th = homeo.lr_init if lr_th is None else lr_th
    times = np.full(count, NO_SPIKE)
    for i in range(count):
        fire = simulate(layer, spikes)
        wta_train_step(layer, spikes, homeo, lr_w, lr_th)
        times[i] = fire.min()
    return times


# -- compiled kernels -------------------------------------------------------------

@numba.njit(cache=True)
def _first_fire(weights, thresholds, units, times, v_rest, inv_cap, fire):
    """Fire time of each neuron given events sorted by (time, unit)."""
    n = weights.shape[0]
    for j in range(n):
        v = v_rest
        fire[j] = np.inf
        for e in range(units.shape[0]):
            v += weights[j, units[e]] * inv_cap
            if v >= thresholds[j]:
                fire[j] = times[e]
                break


@numba.njit(cache=True)
def _sorted_events(values, exposition):
    count = 0
    for i in range(values.shape[0]):
        if values[i] > 0.0:
            count += 1
    units = np.empty(count, dtype=np.int64)
    times = np.empty(count, dtype=np.float64)
    k = 0
    for i in range(values.shape[0]):
        if values[i] > 0.0:
            units[k] = i
            times[k] = exposition * (1.0 - values[i])
            k += 1
    order = np.argsort(times, kind="mergesort")
    return units[order], times[order]


@numba.njit(cache=True)
def _train_epoch(weights, thresholds, images, img_idx, ys, xs, p_h, p_w,
                 v_rest, inv_cap, floor, exposition,
                 w_min, w_max, beta, ltp_window, t_expected, winner_decay, lr_w, lr_th,
                 winners, win_times):
    n = weights.shape[0]
    c = images.shape[3]
    d = p_h * p_w * c
    fire = np.empty(n, dtype=np.float64)
    values = np.empty(d, dtype=np.float64)
    pre = np.empty(d, dtype=np.float64)
    span = w_max - w_min
    for s in range(img_idx.shape[0]):
        k = 0
        for dy in range(p_h):
            for dx in range(p_w):
                for ch in range(c):
                    values[k] = images[img_idx[s], ys[s] + dy, xs[s] + dx, ch]
                    k += 1
        units, times = _sorted_events(values, exposition)
        _first_fire(weights, thresholds, units, times, v_rest, inv_cap, fire)
        winner = -1
        t_win = np.inf
        for j in range(n):
            if fire[j] < t_win:
                t_win = fire[j]
                winner = j
        winners[s] = winner
        win_times[s] = t_win
        if winner < 0:
            for j in range(n):
                thresholds[j] = max(thresholds[j] - lr_th / n, floor)
            continue
        for i in range(d):
            pre[i] = np.inf
        for e in range(units.shape[0]):
            pre[units[e]] = times[e]
        for i in range(d):
            w = weights[winner, i]
            if pre[i] <= t_win and t_win - pre[i] <= ltp_window:
                w += lr_w * np.exp(-beta * (w - w_min) / span)
            else:
                w -= lr_w * np.exp(-beta * (w_max - w) / span)
            weights[winner, i] = min(max(w, w_min), w_max)
        for j in range(n):
            th = thresholds[j]
            if j == winner:
                th += lr_th - lr_th / n if winner_decay else lr_th
            else:
                th -= lr_th / n
            th -= lr_th * (t_win - t_expected)
            thresholds[j] = max(th, floor)


@numba.njit(cache=True)
def _infer_image(weights, thresholds, image, p_h, p_w, v_rest, inv_cap, exposition, t_expected, out):
    h_out, w_out, n = out.shape
    c = image.shape[2]
    d = p_h * p_w * c
    values = np.empty(d, dtype=np.float64)
    fire = np.empty(n, dtype=np.float64)
    scale = exposition - t_expected
    for y in range(h_out):
        for x in range(w_out):
            k = 0
            for dy in range(p_h):
                for dx in range(p_w):
                    for ch in range(c):
                        values[k] = image[y + dy, x + dx, ch]
                        k += 1
            units, times = _sorted_events(values, exposition)
            _first_fire(weights, thresholds, units, times, v_rest, inv_cap, fire)
            for j in range(n):
                if np.isfinite(fire[j]):
                    v = 1.0 - (fire[j] - t_expected) / scale
                    out[y, x, j] = min(1.0, max(0.0, v))
                else:
                    out[y, x, j] = 0.0


# -- training and inference -----------------------------------------------------------

@dataclass
class EpochLog:
    epoch: int
    patches: int
    winners: int
    mean_winner_time: float
    threshold_mean: float
    threshold_std: float
    lr_w: float
    lr_th: float
    win_counts: np.ndarray

    def row(self) -> dict:
        d = asdict(self)
        d.pop("win_counts")
        d["active_neurons"] = int(np.count_nonzero(self.win_counts))
        return d


def _check_input(layer: SnnLayer, images: np.ndarray) -> None:
    if images.ndim != 4 or images.shape[3] != layer.channels:
        raise ShapeError(f"expected (n, H, W, {layer.channels}) spike-ready images, got {images.shape}")
    if images.shape[1] < layer.patch_h or images.shape[2] < layer.patch_w:
        raise ShapeError("images smaller than the receptive field")
    if images.size and (images.min() < 0 or images.max() > 1):
        raise ContractError("spike-ready images must lie in [0, 1]")


def train(layer: SnnLayer, images: np.ndarray, cfg: TrainConfig,
          homeo: HomeostasisConfig = HomeostasisConfig(),
          encoder: EncoderConfig = EncoderConfig(), callback=None) -> list[EpochLog]:
    """Train ``layer`` in place on random receptive-field patches.

    ``images`` are pre-processed and split, ``(n, H, W, channels)`` in [0, 1].
    Each epoch draws ``patches_per_epoch`` (image, y, x) positions from a
    generator seeded with ``cfg.seed`` and runs one WTA step per patch; both
    learning rates are multiplied by ``cfg.annealing`` after every epoch.
    """
    check_homeostasis(homeo, encoder)
    if images.dtype not in (np.float32, np.float64):
        images = images.astype(np.float64)
    images = np.ascontiguousarray(images)
    _check_input(layer, images)
    n_img, h, w, _ = images.shape
    per_epoch = n_img if cfg.patches_per_epoch is None else cfg.patches_per_epoch
    rng = np.random.default_rng(cfg.seed)
    lr_w, lr_th = layer.stdp.lr_init, homeo.lr_init
    logs = []
    for epoch in range(cfg.epochs):
        img_idx = rng.integers(0, n_img, size=per_epoch)
        ys = rng.integers(0, h - layer.patch_h + 1, size=per_epoch)
        xs = rng.integers(0, w - layer.patch_w + 1, size=per_epoch)
        winners = np.empty(per_epoch, dtype=np.int64)
        win_times = np.empty(per_epoch, dtype=np.float64)
        if per_epoch:
            s = layer.stdp
            _train_epoch(layer.weights, layer.thresholds, images, img_idx, ys, xs,
                         layer.patch_h, layer.patch_w, layer.neuron.v_rest,
                         1.0 / layer.neuron.capacitance, layer.neuron.threshold_floor,
                         encoder.exposition, s.w_min, s.w_max, s.beta, s.ltp_window,
                         homeo.t_expected, homeo.winner_decay, lr_w, lr_th, winners, win_times)
        won = winners >= 0
        entry = EpochLog(
            epoch=epoch, patches=per_epoch, winners=int(won.sum()),
            mean_winner_time=float(win_times[won].mean()) if won.any() else float("nan"),
            threshold_mean=float(layer.thresholds.mean()), threshold_std=float(layer.thresholds.std()),
            lr_w=lr_w, lr_th=lr_th,
            win_counts=np.bincount(winners[won], minlength=layer.filter_count),
        )
        logs.append(entry)
        log.info("epoch %d: %d/%d winners, mean t_win %.4f, threshold %.3f",
                 epoch, entry.winners, per_epoch, entry.mean_winner_time, entry.threshold_mean)
        if callback is not None:
            callback(entry)
        lr_w *= cfg.annealing
        lr_th *= cfg.annealing
    return logs


def infer_conv(layer: SnnLayer, image: np.ndarray, homeo: HomeostasisConfig = HomeostasisConfig(),
               encoder: EncoderConfig = EncoderConfig()) -> np.ndarray:
    """Dense (stride 1, no padding) feature map ``(H-p_h+1, W-p_w+1, filter_count)``.

    Every window is latency coded, simulated without inhibition and every
    neuron's fire time decoded to [0, 1].
    """
    check_homeostasis(homeo, encoder)
    image = np.asarray(image, dtype=np.float64)
    _check_input(layer, image[None])
    out = np.empty((image.shape[0] - layer.patch_h + 1, image.shape[1] - layer.patch_w + 1,
                    layer.filter_count))
    _infer_image(layer.weights, layer.thresholds, image, layer.patch_h, layer.patch_w,
                 layer.neuron.v_rest, 1.0 / layer.neuron.capacitance, encoder.exposition,
                 homeo.t_expected, out)
    return out


def infer_window_reference(layer: SnnLayer, window: np.ndarray, homeo: HomeostasisConfig,
                           encoder: EncoderConfig = EncoderConfig()) -> np.ndarray:
    """simulate + decode on one ``(p_h, p_w, channels)`` window (test oracle)."""
    spikes = SpikeList(latency_times(window, encoder.exposition).ravel(), encoder.exposition)
    return decode_latency(simulate(layer, spikes), homeo.t_expected, encoder)


# -- persistence ---------------------------------------------------------------------

def save_layer(path, layer: SnnLayer):
    n, s = layer.neuron, layer.stdp
    return write_container(path, b"SNLY", {
        "patch_w": layer.patch_w, "patch_h": layer.patch_h, "channels": layer.channels,
        "capacitance": n.capacitance, "v_rest": n.v_rest,
        "threshold_init_mean": n.threshold_init_mean, "threshold_init_std": n.threshold_init_std,
        "lr_init": s.lr_init, "beta": s.beta, "w_min": s.w_min, "w_max": s.w_max, "ltp_window": s.ltp_window,
        "thresholds": layer.thresholds, "weights": layer.weights,
    })


def load_layer(path) -> SnnLayer:
    magic, f = read_container(path)
    if magic != b"SNLY":
        raise FormatError(f"{path}: not an SNN layer file")
    try:
        neuron = NeuronConfig(float(f["capacitance"]), float(f["v_rest"]),
                              float(f["threshold_init_mean"]), float(f["threshold_init_std"]))
        stdp = StdpConfig(float(f["lr_init"]), float(f["beta"]), float(f["w_min"]), float(f["w_max"]),
                          float(f["ltp_window"]))
        return SnnLayer(f["weights"].copy(), f["thresholds"].copy(), int(f["patch_w"]), int(f["patch_h"]),
                        int(f["channels"]), neuron, stdp)
    except KeyError as exc:
        raise FormatError(f"{path}: missing field {exc}") from exc
