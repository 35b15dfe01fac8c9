"""File formats: JSON models/references/configs, integer-row datasets, TSV tables.

Floats are written with ``repr`` precision, so reading a file back yields
bit-identical values.
"""

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .chain import StateSpace
from .learning import TrainConfig
from .models import PairwiseModel, ReferenceModel, chain_edges, grid_edges
from .seeding import MAX_SEED


class ConfigError(ValueError):
    """Invalid or unresolvable experiment configuration."""


# ---------------------------------------------------------------- models


def model_to_dict(model):
    return {
        "V": model.space.V,
        "K": model.space.K,
        "edges": [list(e) for e in model.edges],
        "theta": [float(t) for t in model.theta],
    }


def model_from_dict(d):
    try:
        space = StateSpace(int(d["V"]), int(d["K"]))
        return PairwiseModel(space, [tuple(e) for e in d["edges"]], d["theta"])
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed model document: {exc}") from exc


def reference_to_dict(ref):
    return {"V": ref.space.V, "K": ref.space.K, "q": ref.q.tolist()}


def reference_from_dict(d):
    try:
        return ReferenceModel(StateSpace(int(d["V"]), int(d["K"])), d["q"])
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed reference document: {exc}") from exc


def write_json(path, obj):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"no such file: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc


def save_model(path, model):
    write_json(path, model_to_dict(model))


def load_model(path):
    return model_from_dict(read_json(path))


def save_reference(path, ref):
    write_json(path, reference_to_dict(ref))


def load_reference(path):
    return reference_from_dict(read_json(path))


# ---------------------------------------------------------------- datasets


def write_dataset(path, rows):
    rows = np.atleast_2d(np.asarray(rows, dtype=np.int64))
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        for r in rows:
            fh.write(" ".join(str(int(v)) for v in r) + "\n")


def read_dataset(path, space=None):
    """Read integer rows; validates labels against ``space`` when given."""
    try:
        with open(path) as fh:
            rows = [[int(t) for t in line.split()] for line in fh if line.strip()]
    except FileNotFoundError as exc:
        raise ConfigError(f"no such dataset: {path}") from exc
    except ValueError as exc:
        raise ConfigError(f"{path}: non-integer label") from exc
    if not rows:
        raise ConfigError(f"{path}: empty dataset")
    if len({len(r) for r in rows}) != 1:
        raise ConfigError(f"{path}: rows have differing lengths")
    data = np.array(rows, dtype=np.int64)
    if space is not None:
        if data.shape[1] != space.V or data.min() < 0 or data.max() >= space.K:
            raise ConfigError(f"{path}: rows do not fit V={space.V}, K={space.K}")
    return data


# ---------------------------------------------------------------- tables


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_table(path, header, rows, sep="\t"):
    """Delimiter-separated table with one header line."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        fh.write(sep.join(header) + "\n")
        for row in rows:
            fh.write(sep.join(_cell(v) for v in row) + "\n")


def read_table(path, sep="\t"):
    """Return a list of ``{column: str}`` dicts."""
    with open(path) as fh:
        header = fh.readline().rstrip("\n").split(sep)
        return [dict(zip(header, line.rstrip("\n").split(sep))) for line in fh if line.strip()]


def write_jsonl(path, records):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True, allow_nan=False) + "\n")


def read_jsonl(path):
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


# ---------------------------------------------------------------- config


@dataclass
class ModelSpec:
    """``topology`` is ``chain`` (V nodes), ``grid`` (rows x cols) or ``custom`` (explicit edges)."""

    topology: str = "chain"
    V: int = 3
    K: int = 2
    rows: Optional[int] = None
    cols: Optional[int] = None
    edges: Optional[list] = None

    def build(self):
        if self.topology == "chain":
            return StateSpace(self.V, self.K), chain_edges(self.V)
        if self.topology == "grid":
            if not self.rows or not self.cols:
                raise ConfigError("grid topology needs rows and cols")
            return StateSpace(self.rows * self.cols, self.K), grid_edges(self.rows, self.cols)
        if self.topology == "custom":
            if self.edges is None:
                raise ConfigError("custom topology needs an edge list")
            return StateSpace(self.V, self.K), [tuple(e) for e in self.edges]
        raise ConfigError(f"unknown topology {self.topology!r}")


@dataclass
class TeacherSpec:
    """Explicit ``theta`` or Gaussian ``theta_scale``; ``q`` is the teacher's restart law (uniform if unset)."""

    theta: Optional[list] = None
    theta_scale: float = 1.0
    q: Optional[list] = None


@dataclass
class ReferenceSpec:
    kind: str = "fit"
    alpha: float = 1.0


@dataclass
class TrainSpec:
    particles: int = 100
    step_size: float = 1.0
    decay: float = 100.0
    iterations: int = 300
    batch_size: int = 20
    eval_every: int = 50
    workers: int = 1
    block_size: int = 4096
    epsilon_schedule: Optional[list] = None


@dataclass
class DataSpec:
    n_train: int = 2000
    n_heldout: int = 2000
    train_path: Optional[str] = None
    heldout_path: Optional[str] = None


@dataclass
class DiagSpec:
    """``base`` is ``model`` (dense Gibbs kernel of the model file) or ``flip`` (2-state toy)."""

    base: str = "model"
    epsilons: list = field(default_factory=lambda: [1.0, 0.5, 0.3, 0.1, 0.05])
    t_max: int = 30
    pairs: int = 100
    start_state: int = 0


@dataclass
class BenchSpec:
    gibbs_steps: int = 20000
    sizes: list = field(default_factory=lambda: [16, 256, 4096])
    particles: list = field(default_factory=lambda: [100, 1000, 10000])
    repeats: int = 5


@dataclass
class ExperimentConfig:
    model: ModelSpec = field(default_factory=ModelSpec)
    teacher: TeacherSpec = field(default_factory=TeacherSpec)
    reference: ReferenceSpec = field(default_factory=ReferenceSpec)
    epsilon: float = 0.3
    train: TrainSpec = field(default_factory=TrainSpec)
    data: DataSpec = field(default_factory=DataSpec)
    diag: DiagSpec = field(default_factory=DiagSpec)
    bench: BenchSpec = field(default_factory=BenchSpec)
    out: str = "out"
    seed: int = 0
    label: str = "synthetic teacher-student task"

    def validate(self):
        if not isinstance(self.seed, int) or not 0 <= self.seed <= MAX_SEED:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if not (isinstance(self.epsilon, (int, float)) and 0.0 < self.epsilon <= 1.0):
            raise ConfigError(f"epsilon must lie in (0, 1], got {self.epsilon!r}")
        if self.reference.kind not in ("fit", "uniform"):
            raise ConfigError(f"reference kind must be 'fit' or 'uniform', got {self.reference.kind!r}")
        if self.reference.alpha <= 0:
            raise ConfigError("reference alpha must be positive")
        if self.diag.base not in ("model", "flip"):
            raise ConfigError(f"diag base must be 'model' or 'flip', got {self.diag.base!r}")
        self.model.build()
        self.train_config()
        return self

    def train_config(self):
        t = self.train
        try:
            return TrainConfig(
                epsilon=float(self.epsilon),
                epsilon_schedule=[tuple(p) for p in t.epsilon_schedule] if t.epsilon_schedule else None,
                particles=t.particles,
                step_size=t.step_size,
                decay=t.decay,
                iterations=t.iterations,
                batch_size=t.batch_size,
                seed=self.seed,
                eval_every=t.eval_every,
                workers=t.workers,
                block_size=t.block_size,
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid train settings: {exc}") from exc

    def path(self, name):
        return os.path.join(self.out, name)

    @property
    def train_path(self):
        return self.data.train_path or self.path("train.txt")

    @property
    def heldout_path(self):
        return self.data.heldout_path or self.path("heldout.txt")


_SECTIONS = {
    "model": ModelSpec,
    "teacher": TeacherSpec,
    "reference": ReferenceSpec,
    "train": TrainSpec,
    "data": DataSpec,
    "diag": DiagSpec,
    "bench": BenchSpec,
}


def _build(cls, d, where):
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected a mapping")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"{where}: unknown field(s) {sorted(unknown)}")
    return cls(**d)


def config_from_dict(d):
    if not isinstance(d, dict):
        raise ConfigError("config must be a mapping")
    d = dict(d)
    for name, cls in _SECTIONS.items():
        if name in d:
            d[name] = _build(cls, d[name], name)
    return _build(ExperimentConfig, d, "config").validate()


def config_to_dict(cfg):
    return dataclasses.asdict(cfg)


def load_config(path):
    return config_from_dict(read_json(path))


def save_config(path, cfg):
    write_json(path, config_to_dict(cfg))


def config_hash(cfg):
    blob = json.dumps(config_to_dict(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()

