"""
Experiment configuration files (YAML, one experiment per file).

A config names a dataset, a circuit, a class map, the encoder and the
training protocol. ``load_config`` checks cross-field consistency before any
data is touched by the trainer, and ``prepare`` builds the train/test sets.

Example::

    name: xor
    dataset: {source: gaussian_xor, per_center: 20, seed: 0}
    test: {source: gaussian_xor, per_center: 25000, seed: 1}
    circuit: xor2q
    class_map: {"0": "00", "1": "10"}
    encoder: passthrough
    training: {mode: exact, optimizer: quasi_newton, restarts: 20, seed: 3}
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import yaml

from .circuit import Circuit, from_text, preset, PRESETS
from .data import (Dataset, gen_gaussian_xor, gen_synthetic4, load_csv, load_iris,
                   stratified_split, subsample_balanced)
from .encoding import EncoderConfig
from .model import ClassMap
from .train import DERIVATIVE_FREE, QUASI_NEWTON, ShotSchedule

SOURCES = ("iris", "csv", "gaussian_xor", "synthetic4")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    name: str
    dataset: dict
    circuit: Circuit
    circuit_name: str
    class_map: ClassMap
    encoder: EncoderConfig | None  # None means raw features are the angles
    mode: str = "exact"
    optimizer: str = QUASI_NEWTON
    restarts: int = 10
    max_iters: int = 200
    seed: int = 0
    schedule: ShotSchedule = field(default_factory=ShotSchedule)
    tol: float = 1e-6
    test: dict | None = None
    test_fraction: float | None = None
    split_seed: int = 0
    eval_shots: int | None = None
    eval_seeds: tuple = ()
    base_dir: Path = Path(".")


def bundled_configs() -> list[str]:
    folder = resources.files("polyadic") / "configs"
    return sorted(p.name[:-5] for p in folder.iterdir() if p.name.endswith(".yaml"))


def resolve_config_path(name_or_path) -> Path:
    """A file path, or the name of a bundled config such as ``iris``."""
    p = Path(name_or_path)
    if p.exists():
        return p
    candidate = resources.files("polyadic") / "configs" / f"{name_or_path}.yaml"
    if candidate.is_file():
        return Path(str(candidate))
    raise ConfigError(f"no config file {str(name_or_path)!r} and no bundled config of that name "
                      f"(bundled: {', '.join(bundled_configs())})")


def _circuit(value, base_dir: Path) -> tuple[Circuit, str]:
    if not isinstance(value, str):
        raise ConfigError("circuit must be a preset name or a circuit file path")
    if value in PRESETS:
        return preset(value), value
    path = base_dir / value
    if not path.exists():
        raise ConfigError(f"circuit {value!r} is neither a preset {sorted(PRESETS)} nor a file")
    try:
        return from_text(path.read_text()), value
    except ValueError as e:
        raise ConfigError(f"{path}: {e}") from None


def _schedule(value) -> ShotSchedule:
    if value is None:
        return ShotSchedule()
    if isinstance(value, int):
        return ShotSchedule.constant(value)
    try:
        return ShotSchedule(tuple((math.inf if t is None else t, s) for t, s in value))
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad shot schedule {value!r}: {e}") from None


def _check_source(spec: dict, what: str):
    if not isinstance(spec, dict) or spec.get("source") not in SOURCES:
        raise ConfigError(f"{what}.source must be one of {SOURCES}")
    if spec["source"] == "csv" and "path" not in spec:
        raise ConfigError(f"{what}: a csv source needs a path")


def parse_config(raw: dict, base_dir: Path = Path(".")) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    known = {"name", "dataset", "test", "split", "circuit", "class_map", "encoder",
             "training", "evaluation"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for key in ("dataset", "circuit", "class_map"):
        if key not in raw:
            raise ConfigError(f"missing required key {key!r}")
    _check_source(raw["dataset"], "dataset")
    test = raw.get("test")
    split = raw.get("split") or {}
    if test is not None:
        _check_source(test, "test")
    elif "test_fraction" not in split:
        raise ConfigError("give either a separate test dataset or split.test_fraction")

    circuit, circuit_name = _circuit(raw["circuit"], base_dir)
    cmap = raw["class_map"]
    if not isinstance(cmap, dict) or not cmap:
        raise ConfigError("class_map must map class labels to bitstrings")
    try:
        class_map = ClassMap(tuple(str(k) for k in cmap), tuple(str(v) for v in cmap.values()))
    except ValueError as e:
        raise ConfigError(f"class_map: {e}") from None
    if class_map.width != circuit.width:
        raise ConfigError(f"class_map bitstrings have length {class_map.width} but circuit "
                          f"{circuit_name} has {circuit.width} qubits")

    enc = raw.get("encoder", {})
    if enc == "passthrough":
        encoder = None
    elif isinstance(enc, dict):
        try:
            encoder = EncoderConfig(**enc)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"encoder: {e}") from None
    else:
        raise ConfigError("encoder must be 'passthrough' or a mapping with alpha and q")

    tr = dict(raw.get("training") or {})
    mode = tr.pop("mode", "exact")
    optimizer = tr.pop("optimizer", QUASI_NEWTON)
    if mode not in ("exact", "sampled"):
        raise ConfigError(f"training.mode must be exact or sampled, got {mode!r}")
    if optimizer not in (QUASI_NEWTON, DERIVATIVE_FREE):
        raise ConfigError(f"training.optimizer must be {QUASI_NEWTON} or {DERIVATIVE_FREE}")
    if mode == "sampled" and optimizer != DERIVATIVE_FREE:
        raise ConfigError("sampled mode requires the derivative_free optimizer")
    restarts = int(tr.pop("restarts", 10))
    if restarts < 1:
        raise ConfigError(f"training.restarts must be >= 1, got {restarts}")
    max_iters = int(tr.pop("max_iters", 200))
    if max_iters < 0:
        raise ConfigError("training.max_iters must be >= 0")
    seed = int(tr.pop("seed", 0))
    schedule = _schedule(tr.pop("schedule", None))
    tol = float(tr.pop("tol", 1e-6))
    if tr:
        raise ConfigError(f"unknown training keys: {sorted(tr)}")

    ev = raw.get("evaluation") or {}
    eval_shots = ev.get("shots")
    if eval_shots is not None and int(eval_shots) < 1:
        raise ConfigError("evaluation.shots must be >= 1")
    test_fraction = split.get("test_fraction")
    if test_fraction is not None and not 0 < float(test_fraction) < 1:
        raise ConfigError(f"split.test_fraction must lie in (0, 1), got {test_fraction}")

    return ExperimentConfig(
        name=str(raw.get("name", "experiment")), dataset=dict(raw["dataset"]),
        circuit=circuit, circuit_name=circuit_name, class_map=class_map, encoder=encoder,
        mode=mode, optimizer=optimizer, restarts=restarts, max_iters=max_iters, seed=seed,
        schedule=schedule, tol=tol, test=None if test is None else dict(test),
        test_fraction=None if test_fraction is None else float(test_fraction),
        split_seed=int(split.get("seed", 0)),
        eval_shots=None if eval_shots is None else int(eval_shots),
        eval_seeds=tuple(int(s) for s in ev.get("seeds", (0,))), base_dir=base_dir)


def load_config(path) -> ExperimentConfig:
    path = resolve_config_path(path)
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as e:
        raise ConfigError(f"{path}: {e}") from None
    return parse_config(raw, Path(path).parent)


def _expand(path: str, base_dir: Path) -> Path:
    p = Path(os.path.expandvars(os.path.expanduser(path)))
    return p if p.is_absolute() else base_dir / p


def load_source(spec: dict, base_dir: Path = Path("."), data_override=None) -> Dataset:
    src = spec["source"]
    if src == "iris":
        ds = load_iris()
    elif src == "csv":
        path = data_override or _expand(spec["path"], base_dir)
        if not Path(path).exists():
            raise ConfigError(f"data file {path} not found")
        ds = load_csv(path, spec.get("features"), spec.get("label", "label"))
    elif src == "gaussian_xor":
        ds = gen_gaussian_xor(spec.get("per_center", 20), spec.get("sigma"), spec.get("a", 1.0),
                              spec.get("seed", 0))
    else:
        kwargs = {k: spec[k] for k in ("n", "seed", "flip") if k in spec}
        ds = gen_synthetic4(**kwargs)
    if spec.get("subsample"):
        ds = subsample_balanced(ds, int(spec["subsample"]), spec.get("subsample_seed", 0))
    return ds


def _reindex(ds: Dataset, class_map: ClassMap) -> Dataset:
    """Relabel ``ds`` so class indices follow the class map order."""
    names = [str(n) for n in ds.class_names]
    missing = [label for label in names if label not in class_map.labels]
    if missing:
        raise ConfigError(f"dataset classes {missing} have no bitstring in the class map")
    order = [class_map.labels.index(label) for label in names]
    return Dataset(ds.features, [order[k] for k in ds.labels], class_map.labels,
                   ds.feature_names, ds.metadata)


def prepare(cfg: ExperimentConfig, data_override=None) -> tuple[Dataset, Dataset]:
    """Training and test sets for ``cfg``, relabelled to the class map order."""
    ds = _reindex(load_source(cfg.dataset, cfg.base_dir, data_override), cfg.class_map)
    if ds.features.shape[1] != cfg.circuit.num_inputs:
        raise ConfigError(f"dataset has {ds.features.shape[1]} features but circuit "
                          f"{cfg.circuit_name} takes {cfg.circuit.num_inputs} inputs")
    if cfg.test is not None:
        test = _reindex(load_source(cfg.test, cfg.base_dir), cfg.class_map)
        if cfg.test_fraction is not None:
            ds, _ = stratified_split(ds, cfg.test_fraction, cfg.split_seed)
        return ds, test
    return stratified_split(ds, cfg.test_fraction, cfg.split_seed)
