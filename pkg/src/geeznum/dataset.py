"""Class table, target encodings, directory loading and the per-class split."""
from __future__ import annotations

import hashlib
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import pnm
from .errors import DecodeError, EmptyDatasetError, GeezError, LabelError, SplitError
from .imaging import N_FEATURES, preprocess

N_CLASSES = 20
FIRST_CODEPOINT = 0x1369
CLASS_VALUES = (1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100, 10000)

ONEHOT = "onehot"
BINARY5 = "binary5"
ENCODINGS = (ONEHOT, BINARY5)
ENCODING_WIDTH = {ONEHOT: N_CLASSES, BINARY5: 5}

IMAGE_SUFFIXES = (".pgm", ".pbm", ".ppm", ".pnm")

TRAIN, TEST, UNASSIGNED = "train", "test", "unassigned"


@dataclass(frozen=True)
class ClassId:
    id: int

    def __post_init__(self):
        if not 0 <= int(self.id) < N_CLASSES:
            raise LabelError(f"class id must be in 0..{N_CLASSES - 1}, got {self.id}")
        object.__setattr__(self, "id", int(self.id))

    @property
    def value(self) -> int:
        return CLASS_VALUES[self.id]

    @property
    def codepoint(self) -> int:
        return FIRST_CODEPOINT + self.id

    @property
    def char(self) -> str:
        return chr(self.codepoint)

    @property
    def folder(self) -> str:
        return f"{self.id:02d}"

    @classmethod
    def from_folder(cls, name: str) -> "ClassId":
        if len(name) != 2 or not name.isdigit():
            raise LabelError(f"unknown class folder {name!r}")
        return cls(int(name))

    @classmethod
    def from_codepoint(cls, cp: int) -> "ClassId":
        return cls(cp - FIRST_CODEPOINT)

    @classmethod
    def from_value(cls, value: int) -> "ClassId":
        try:
            return cls(CLASS_VALUES.index(value))
        except ValueError:
            raise LabelError(f"no Geez numeral has value {value}") from None


def all_classes() -> list[ClassId]:
    return [ClassId(k) for k in range(N_CLASSES)]


def labels_manifest() -> str:
    """Text of ``labels.txt``: ``<folder> <unicode-hex> <value>`` per class."""
    return "".join(f"{c.folder} {c.codepoint:04X} {c.value}\n" for c in all_classes())


def parse_labels_manifest(text: str) -> dict[str, ClassId]:
    table = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise LabelError(f"labels.txt line {lineno}: expected '<folder> <hex> <value>'")
        folder, cp_hex, value = parts
        cls = ClassId.from_folder(folder)
        try:
            cp, val = int(cp_hex, 16), int(value)
        except ValueError:
            raise LabelError(f"labels.txt line {lineno}: malformed codepoint or value") from None
        if cp != cls.codepoint or val != cls.value:
            raise LabelError(
                f"labels.txt line {lineno}: folder {folder} must map to "
                f"{cls.codepoint:04X} {cls.value}, got {cp_hex} {value}"
            )
        table[folder] = cls
    return table


def encode_label_onehot(label) -> np.ndarray:
    out = np.zeros(N_CLASSES)
    out[ClassId(_as_id(label)).id] = 1.0
    return out


def encode_label_binary5(label) -> np.ndarray:
    """Five bits of ``id + 1``, most significant first."""
    code = ClassId(_as_id(label)).id + 1
    return np.array([(code >> s) & 1 for s in range(4, -1, -1)], dtype=np.float64)


def encode_labels(labels, encoding: str) -> np.ndarray:
    """Stack target vectors for a sequence of class ids."""
    enc = {ONEHOT: encode_label_onehot, BINARY5: encode_label_binary5}[_check_encoding(encoding)]
    return np.array([enc(y) for y in labels]).reshape(len(labels), ENCODING_WIDTH[encoding])


def decode_prediction(output, encoding: str) -> ClassId:
    out = np.asarray(output, dtype=np.float64)
    width = ENCODING_WIDTH[_check_encoding(encoding)]
    if out.shape != (width,):
        raise DecodeError(f"{encoding} output must have length {width}, got shape {out.shape}")
    if encoding == ONEHOT:
        return ClassId(int(np.argmax(out)))
    bits = (out >= 0.5).astype(int)
    code = int("".join(map(str, bits)), 2)
    if not 1 <= code <= N_CLASSES:
        raise DecodeError(f"binary-5 pattern {bits.tolist()} decodes to {code}, outside 1..{N_CLASSES}")
    return ClassId(code - 1)


def decode_batch(outputs, encoding: str) -> np.ndarray:
    """Vectorized ``decode_prediction``; invalid binary-5 patterns decode to -1."""
    out = np.asarray(outputs, dtype=np.float64)
    if _check_encoding(encoding) == ONEHOT:
        return np.argmax(out, axis=1)
    bits = (out >= 0.5).astype(int)
    code = bits @ (1 << np.arange(4, -1, -1))
    return np.where((code >= 1) & (code <= N_CLASSES), code - 1, -1)


def _check_encoding(encoding):
    if encoding not in ENCODINGS:
        raise ValueError(f"unknown target encoding {encoding!r}; expected one of {ENCODINGS}")
    return encoding


def _as_id(label):
    return label.id if isinstance(label, ClassId) else int(label)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable, ordered collection of preprocessed samples.

    ``features`` is ``(n, 1800)`` uint8; ``labels``, ``sources``, ``sample_ids``
    and ``splits`` are aligned with it.
    """

    features: np.ndarray
    labels: np.ndarray
    sample_ids: tuple[str, ...]
    sources: tuple[str, ...]
    splits: tuple[str, ...] = field(default=())

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=np.uint8).reshape(-1, N_FEATURES)
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        n = feats.shape[0]
        splits = self.splits or (UNASSIGNED,) * n
        if not (labels.shape[0] == len(self.sample_ids) == len(self.sources) == len(splits) == n):
            raise ValueError("dataset fields are not aligned")
        if n and (labels.min() < 0 or labels.max() >= N_CLASSES):
            raise LabelError("labels must lie in 0..19")
        feats.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "sample_ids", tuple(self.sample_ids))
        object.__setattr__(self, "sources", tuple(self.sources))
        object.__setattr__(self, "splits", tuple(splits))

    def __len__(self):
        return self.features.shape[0]

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=N_CLASSES)

    def subset(self, split: str) -> "Dataset":
        idx = [i for i, s in enumerate(self.splits) if s == split]
        return self.take(idx)

    def take(self, idx) -> "Dataset":
        idx = list(idx)
        return Dataset(
            self.features[idx],
            self.labels[idx],
            tuple(self.sample_ids[i] for i in idx),
            tuple(self.sources[i] for i in idx),
            tuple(self.splits[i] for i in idx),
        )

    def digest(self) -> str:
        """SHA-256 over the ordered sample bytes (features then label)."""
        h = hashlib.sha256()
        for x, y in zip(self.features, self.labels):
            h.update(x.tobytes())
            h.update(int(y).to_bytes(1, "little"))
        return h.hexdigest()


@dataclass
class LoadReport:
    loaded: int = 0
    failures: list[tuple[str, str]] = field(default_factory=list)

    def __str__(self):
        lines = [f"loaded={self.loaded} failed={len(self.failures)}"]
        lines += [f"{path}: {reason}" for path, reason in self.failures]
        return "\n".join(lines) + "\n"


def _load_one(path):
    try:
        return preprocess(pnm.read(path)), None
    except (GeezError, OSError, ValueError) as exc:
        return None, f"{type(exc).__name__}: {exc}"


def load_dataset(
    root: str | os.PathLike,
    n_jobs: int = 1,
    report_file: bool = False,
    stream=None,
) -> tuple[Dataset, LoadReport]:
    """Load ``root/{00..19}/*.pgm`` into a preprocessed :class:`Dataset`.

    Files that fail to decode or turn out blank are skipped and listed in the
    returned :class:`LoadReport`. Sample order is lexicographic by folder then
    filename regardless of ``n_jobs``.
    """
    root = Path(root)
    if not root.is_dir():
        raise EmptyDatasetError(f"dataset root {root} does not exist")
    manifest = root / "labels.txt"
    table = parse_labels_manifest(manifest.read_text()) if manifest.exists() else None

    entries = []
    for sub in sorted(p for p in root.iterdir() if p.is_dir()):
        cls = ClassId.from_folder(sub.name)
        if table is not None and sub.name not in table:
            raise LabelError(f"class folder {sub.name} missing from labels.txt")
        for f in sorted(sub.iterdir()):
            if f.is_file() and f.suffix.lower() in IMAGE_SUFFIXES:
                entries.append((f, cls))
    if not entries:
        raise EmptyDatasetError(f"no images found under {root}")

    paths = [f for f, _ in entries]
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_load_one, paths))
    else:
        results = [_load_one(p) for p in paths]

    source = "synthetic" if (root / "manifest.txt").exists() else "scanned"
    report = LoadReport()
    feats, labels, ids = [], [], []
    for (path, cls), (vec, err) in zip(entries, results):
        rel = path.relative_to(root).as_posix()
        if err is not None:
            report.failures.append((rel, err))
            continue
        feats.append(vec)
        labels.append(cls.id)
        ids.append(rel)
    report.loaded = len(feats)

    if report.failures:
        print(str(report), end="", file=stream or sys.stderr)
    if report_file:
        (root / "load_report.txt").write_text(str(report))
    if not feats:
        raise EmptyDatasetError(f"every image under {root} failed to load")
    ds = Dataset(np.array(feats), np.array(labels), tuple(ids), (source,) * len(ids))
    return ds, report


def split_per_class(ds: Dataset, train_per_class: int = 23, test_per_class: int = 5, seed: int = 0) -> Dataset:
    """Tag ``train_per_class`` train and ``test_per_class`` test samples per class.

    Each class is shuffled by its own generator seeded from ``(seed, class)``;
    samples beyond the two quotas stay unassigned.
    """
    need = train_per_class + test_per_class
    counts = ds.class_counts()
    splits = [UNASSIGNED] * len(ds)
    for k in range(N_CLASSES):
        idx = np.flatnonzero(ds.labels == k)
        if counts[k] < need:
            raise SplitError(
                f"class {k:02d} has {counts[k]} samples, needs {need} "
                f"({train_per_class} train + {test_per_class} test)"
            )
        order = np.random.default_rng([seed, k]).permutation(idx)
        for i in order[:train_per_class]:
            splits[i] = TRAIN
        for i in order[train_per_class:need]:
            splits[i] = TEST
    return replace(ds, splits=tuple(splits))
