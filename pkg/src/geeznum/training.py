"""Full-batch training of the recognizer and its on-disk model format."""
from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import Dataset, encode_labels
from .errors import DimensionError, EmptyDatasetError, IntegrityError
from .imaging import N_FEATURES
from .network import Architecture, MSEObjective, NetworkParams, dump_params, init_network, load_params
from .optimizer import LOSS_GOAL, CgConfig, CgTrace, cg_minimize


def derive_seed(seed: int, tag: str) -> int:
    """Fixed mixing of the master seed into an independent per-purpose seed."""
    digest = hashlib.sha256(f"{int(seed)}:{tag}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def init_seed(seed: int, index: int = 0) -> int:
    """Seed of the ``index``-th initialization; index 0 is the classic single start."""
    return derive_seed(seed, "init" if index == 0 else f"init/{index}")


@dataclass(frozen=True)
class TrainConfig:
    architecture: Architecture = field(default_factory=Architecture)
    cg: CgConfig = field(default_factory=CgConfig)
    seed: int = 0
    n_init: int = 5

    def __post_init__(self):
        self.architecture.check_encoding()
        if int(self.n_init) < 1:
            raise ValueError(f"n_init must be at least 1, got {self.n_init}")

    @property
    def target_encoding(self) -> str:
        return self.architecture.target_encoding

    def describe(self) -> str:
        c = self.cg
        return (
            f"{self.architecture.describe()} seed={self.seed} n_init={self.n_init} max_iterations={c.max_iterations} "
            f"gradient_tolerance={c.gradient_tolerance!r} loss_goal={c.loss_goal!r} c1={c.wolfe_c1!r} "
            f"c2={c.wolfe_c2!r} max_line_search_evals={c.max_line_search_evals} "
            f"restart_interval={c.restart_interval}"
        )

    def digest(self) -> str:
        return hashlib.sha256(self.describe().encode()).hexdigest()


@dataclass
class TrainedModel:
    params: NetworkParams
    metadata: dict[str, str] = field(default_factory=dict)

    @property
    def arch(self) -> Architecture:
        return self.params.arch

    @property
    def encoding(self) -> str:
        return self.params.arch.target_encoding


def train_arrays(X, y, cfg: TrainConfig = TrainConfig(), dataset_digest: str = "", callback=None):
    """Train on a feature matrix and class ids; returns ``(TrainedModel, CgTrace)``.

    With ``cfg.n_init > 1`` the network is trained from several seeded starts in
    order, stopping early once one reaches the loss goal; the run with the lowest
    final training loss is kept and its trace returned.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    arch = cfg.architecture
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyDatasetError("training set is empty")
    if X.shape[1] != arch.layer_sizes[0]:
        raise DimensionError(f"features have width {X.shape[1]}, network expects {arch.layer_sizes[0]}")
    if y.shape != (X.shape[0],):
        raise DimensionError("labels must be a vector aligned with the feature rows")
    T = encode_labels(y, arch.target_encoding)

    objective = MSEObjective(arch, X, T)
    result, chosen = None, 0
    for i in range(int(cfg.n_init)):
        params0 = init_network(arch, init_seed(cfg.seed, i))
        run = cg_minimize(objective, params0.to_vector(), cfg.cg, callback=callback)
        if result is None or run.loss < result.loss:
            result, chosen = run, i
        if run.reason == LOSS_GOAL:
            break
    params = NetworkParams(arch, result.theta)
    meta = {
        "seed": str(cfg.seed),
        "n_init": str(cfg.n_init),
        "chosen_init": str(chosen),
        "iterations": str(result.trace.n_iterations),
        "initial_loss": repr(result.trace.steps[0].loss),
        "final_loss": repr(result.loss),
        "stop_reason": result.reason,
        "n_train": str(X.shape[0]),
        "dataset_digest": dataset_digest,
        "config": cfg.describe(),
        "config_digest": cfg.digest(),
    }
    return TrainedModel(params, meta), result.trace


def train(train_split: Dataset, cfg: TrainConfig = TrainConfig(), callback=None):
    """Minimize full-batch MSE over ``train_split`` with PR+ conjugate gradient."""
    if len(train_split) == 0:
        raise EmptyDatasetError("training split is empty")
    if train_split.features.shape[1] != N_FEATURES:
        raise DimensionError(f"training features must have length {N_FEATURES}")
    return train_arrays(train_split.features, train_split.labels, cfg, train_split.digest(), callback)


def sidecar_path(path: str | os.PathLike) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.txt")


def save_model(model: TrainedModel, path: str | os.PathLike) -> None:
    """Write the GEEZMLP1 file and its ``<path>.meta.txt`` sidecar."""
    data = dump_params(model.params)
    Path(path).write_bytes(data)
    meta = dict(model.metadata)
    meta["model_digest"] = hashlib.sha256(data).hexdigest()
    sidecar_path(path).write_text("".join(f"{k}={v}\n" for k, v in meta.items()))


def read_metadata(path: str | os.PathLike) -> dict[str, str]:
    meta = {}
    for line in Path(path).read_text().splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            meta[k] = v
    return meta


def load_model(path: str | os.PathLike, verify: bool = True) -> TrainedModel:
    """Load a model; the sidecar, when present, must match the file bytes."""
    data = Path(path).read_bytes()
    params = load_params(data)
    side = sidecar_path(path)
    meta = read_metadata(side) if side.exists() else {}
    if verify and meta:
        actual = hashlib.sha256(data).hexdigest()
        if meta.get("model_digest") != actual:
            raise IntegrityError(f"{path}: model bytes do not match model_digest in {side.name}")
        config = meta.get("config")
        if config is not None and hashlib.sha256(config.encode()).hexdigest() != meta.get("config_digest"):
            raise IntegrityError(f"{side}: config line does not match config_digest")
    return TrainedModel(params, meta)

