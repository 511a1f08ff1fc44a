"""Experiment configuration: flat ``section.key = value`` text files.

Blank lines and ``#`` comments are ignored. Every key belongs to one of the
section dataclasses below; unknown sections or keys are errors so that typos
in parameter sweeps fail loudly. Empty values mean ``None`` for optional
fields. Defaults reproduce the default experiment parameters (T = 1,
thresholds ~ N(10, 0.1), t_expected = 0.97, 5x5 filters...).
"""

from __future__ import annotations

import dataclasses
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, SnnWhitenError
from .snn import HomeostasisConfig, NeuronConfig, StdpConfig, TrainConfig
from .spike_coding import EncoderConfig
from .whitening import DogConfig

PREPROC_KINDS = ("standard-zca", "kernels", "dog-gray", "dog-color")
DATASETS = ("cifar10", "stl10")


@dataclass
class DataSection:
    dataset: str = "cifar10"
    cifar10_dir: str | None = None
    stl10_dir: str | None = None
    train_limit: int | None = None
    test_limit: int | None = None
    # 0 accepts fixture files with non-official record counts
    strict_format: int = 1


@dataclass
class WhiteningSection:
    preproc: str = "kernels"
    epsilon: float = 1e-2
    ratio: float = 1.0
    patch_w: int = 9
    patch_h: int = 9
    patch_count: int = 1_000_000
    patch_stride: int = 2
    dog_sigma_center: float = 1.0
    dog_sigma_surround: float = 2.0
    dog_kernel_size: int = 7


@dataclass
class CodingSection:
    exposition: float = 1.0


@dataclass
class NeuronSection:
    capacitance: float = 1.0
    v_rest: float = 0.0
    threshold_mean: float = 10.0
    threshold_std: float = 0.1


@dataclass
class HomeostasisSection:
    t_expected: float = 0.97
    lr: float = 1.0
    winner_decay: int = 0


@dataclass
class StdpSection:
    lr: float = 0.1
    beta: float = 1.0
    w_min: float = 0.0
    w_max: float = 1.0
    ltp_window: float = 1.0


@dataclass
class TrainingSection:
    epochs: int = 100
    annealing: float = 0.95
    patches_per_epoch: int | None = None


@dataclass
class NetworkSection:
    filter_count: int = 64
    filter_w: int = 5
    filter_h: int = 5
    stride: int = 1
    padding: int = 0


@dataclass
class ClassifySection:
    pool: str = "sum"
    svm_epochs: int = 10
    reg_grid: str = "0.01,0.1,1"


@dataclass
class RunSection:
    run_count: int = 3
    seed: int = 0


@dataclass
class ExperimentConfig:
    data: DataSection = field(default_factory=DataSection)
    whitening: WhiteningSection = field(default_factory=WhiteningSection)
    coding: CodingSection = field(default_factory=CodingSection)
    neuron: NeuronSection = field(default_factory=NeuronSection)
    homeostasis: HomeostasisSection = field(default_factory=HomeostasisSection)
    stdp: StdpSection = field(default_factory=StdpSection)
    training: TrainingSection = field(default_factory=TrainingSection)
    network: NetworkSection = field(default_factory=NetworkSection)
    classify: ClassifySection = field(default_factory=ClassifySection)
    run: RunSection = field(default_factory=RunSection)

    # -- views onto module configs --------------------------------------------

    def encoder(self) -> EncoderConfig:
        return EncoderConfig(self.coding.exposition)

    def neuron_config(self) -> NeuronConfig:
        n = self.neuron
        return NeuronConfig(n.capacitance, n.v_rest, n.threshold_mean, n.threshold_std)

    def stdp_config(self) -> StdpConfig:
        s = self.stdp
        return StdpConfig(s.lr, s.beta, s.w_min, s.w_max, s.ltp_window)

    def homeostasis_config(self) -> HomeostasisConfig:
        h = self.homeostasis
        return HomeostasisConfig(h.lr, h.t_expected, bool(h.winner_decay))

    def train_config(self, seed: int) -> TrainConfig:
        t = self.training
        return TrainConfig(t.epochs, t.annealing, t.patches_per_epoch, seed)

    def dog_config(self) -> DogConfig:
        w = self.whitening
        mode = "grayscale" if w.preproc == "dog-gray" else "color"
        return DogConfig(w.dog_sigma_center, w.dog_sigma_surround, w.dog_kernel_size, mode)

    def reg_grid(self) -> tuple[float, ...]:
        try:
            grid = tuple(float(v) for v in self.classify.reg_grid.split(",") if v.strip())
        except ValueError as exc:
            raise ConfigError(f"classify.reg_grid: {exc}") from exc
        if not grid or min(grid) <= 0:
            raise ConfigError("classify.reg_grid needs positive values")
        return grid

    def dataset_dir(self, name: str | None = None) -> str:
        name = name or self.data.dataset
        path = {"cifar10": self.data.cifar10_dir, "stl10": self.data.stl10_dir}.get(name)
        if not path:
            raise ConfigError(f"no directory configured for dataset {name!r} (data.{name}_dir)")
        return path

    def validate(self) -> ExperimentConfig:
        """Check every field against the invariants of the module that consumes it."""
        if self.data.dataset not in DATASETS:
            raise ConfigError(f"data.dataset must be one of {DATASETS}")
        for key in ("train_limit", "test_limit"):
            v = getattr(self.data, key)
            if v is not None and v < 1:
                raise ConfigError(f"data.{key} must be >= 1")
        w = self.whitening
        if w.preproc not in PREPROC_KINDS:
            raise ConfigError(f"whitening.preproc must be one of {PREPROC_KINDS}")
        if not w.epsilon > 0 or not 0 < w.ratio <= 1:
            raise ConfigError("whitening.epsilon must be > 0 and whitening.ratio in (0, 1]")
        if min(w.patch_w, w.patch_h, w.patch_count, w.patch_stride) < 1:
            raise ConfigError("whitening patch geometry and counts must be >= 1")
        net = self.network
        if net.filter_count < 1 or min(net.filter_w, net.filter_h) < 1:
            raise ConfigError("network.filter_count and filter size must be >= 1")
        if net.stride != 1 or net.padding != 0:
            raise ConfigError("only stride 1 and padding 0 are supported for the SNN layer")
        if self.classify.pool not in ("sum", "max"):
            raise ConfigError("classify.pool must be 'sum' or 'max'")
        if self.classify.svm_epochs < 1 or self.run.run_count < 1:
            raise ConfigError("classify.svm_epochs and run.run_count must be >= 1")
        self.reg_grid()
        try:
            self.encoder()
            self.neuron_config()
            self.stdp_config()
            self.train_config(self.run.seed)
            if w.preproc.startswith("dog"):
                self.dog_config()
            if not 0 < self.homeostasis.t_expected < self.coding.exposition:
                raise ConfigError("homeostasis.t_expected must lie in (0, coding.exposition)")
            self.homeostasis_config()
        except SnnWhitenError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc
        return self

    def replace(self, **overrides) -> ExperimentConfig:
        """Copy with ``"section.key"`` overrides given as keyword-safe ``section__key``."""
        cfg = parse_config(dump_config(self))
        for dotted, value in overrides.items():
            section, key = dotted.split("__", 1)
            setattr(getattr(cfg, section), key, value)
        return cfg.validate()


def _section_types(section_cls) -> dict:
    return typing.get_type_hints(section_cls)


def _convert(raw: str, hint, where: str):
    optional = type(None) in typing.get_args(hint)
    base = next((a for a in typing.get_args(hint) if a is not type(None)), hint) if optional else hint
    if raw == "":
        if optional:
            return None
        if base is str:
            return ""
        raise ConfigError(f"{where}: value required")
    try:
        if base is int:
            return int(raw)
        if base is float:
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot parse {raw!r} as {base.__name__}") from exc


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    cfg = ExperimentConfig()
    sections = {f.name: f for f in dataclasses.fields(cfg)}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{source}:{lineno}"
        if "=" not in line:
            raise ConfigError(f"{where}: expected 'section.key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if "." not in key:
            raise ConfigError(f"{where}: key {key!r} lacks a section prefix")
        section, name = key.split(".", 1)
        if section not in sections:
            raise ConfigError(f"{where}: unknown section {section!r}")
        obj = getattr(cfg, section)
        hints = _section_types(type(obj))
        if name not in hints:
            raise ConfigError(f"{where}: unknown key {key!r}")
        setattr(obj, name, _convert(raw, hints[name], where))
    return cfg


def dump_config(cfg: ExperimentConfig) -> str:
    lines = []
    for sec in dataclasses.fields(cfg):
        obj = getattr(cfg, sec.name)
        for f in dataclasses.fields(obj):
            value = getattr(obj, f.name)
            lines.append(f"{sec.name}.{f.name} = {'' if value is None else value}")
        lines.append("")
    return "\n".join(lines)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, str(path)).validate()
