"""Deterministic synthetic scans built from the bundled glyph templates.

Each file comes from its own PCG64 stream seeded by ``(seed, class, draw)``, so
the output tree does not depend on generation order or parallelism.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from . import pnm
from .dataset import N_CLASSES, ClassId, labels_manifest
from .errors import PerturbationError
from .imaging import BinaryImage, Polarity, crop_to_content, render_page

PRNG_ID = "numpy-PCG64/SeedSequence(seed,class,draw)"
MAX_ATTEMPTS = 10
MORPHOLOGY = ("none", "dilate", "erode")


@dataclass(frozen=True)
class GlyphTemplate:
    label: ClassId
    raster: BinaryImage


@dataclass(frozen=True)
class PerturbationConfig:
    max_translation: int = 1
    rotation_range: float = 10.0
    scale_range: tuple[float, float] = (0.8, 1.2)
    noise_prob: float = 0.02
    morphology: tuple[float, float, float] = (0.6, 0.2, 0.2)  # none, dilate, erode
    margin: int = 0
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.scale_range
        if not 0 < lo <= hi:
            raise ValueError(f"scale_range must be positive and ordered, got {self.scale_range}")
        if not 0 <= self.noise_prob <= 1:
            raise ValueError("noise_prob must lie in [0, 1]")
        w = self.morphology
        if len(w) != 3 or min(w) < 0 or not 0 < sum(w) or max(w) > 1:
            raise ValueError("morphology weights must be three probabilities in [0, 1] with a positive sum")
        if self.max_translation < 0 or self.margin < 0 or self.rotation_range < 0:
            raise ValueError("translation, margin and rotation range must be non-negative")

    @classmethod
    def identity(cls, seed: int = 0) -> "PerturbationConfig":
        return cls(max_translation=0, rotation_range=0.0, scale_range=(1.0, 1.0),
                   noise_prob=0.0, morphology=(1.0, 0.0, 0.0), seed=seed)

    def items(self):
        for key, value in asdict(self).items():
            if isinstance(value, tuple):
                value = ",".join(repr(v) for v in value)
            yield key, value


@lru_cache(maxsize=1)
def load_templates() -> tuple[GlyphTemplate, ...]:
    pkg = resources.files(__package__) / "templates"
    out = []
    for k in range(N_CLASSES):
        cls = ClassId(k)
        name = f"{cls.folder}_{cls.codepoint:04X}.pbm"
        gray = pnm.decode((pkg / name).read_bytes())
        out.append(GlyphTemplate(cls, BinaryImage((gray == 0).astype(np.uint8), Polarity.INK_IS_ONE)))
    return tuple(out)


def draw_rng(seed: int, class_id: int, draw_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, class_id, draw_index]))


def _scale(ink, s):
    h, w = ink.shape
    nh, nw = max(1, round(h * s)), max(1, round(w * s))
    ri = (2 * np.arange(nh) + 1) * h // (2 * nh)
    ci = (2 * np.arange(nw) + 1) * w // (2 * nw)
    return ink[np.ix_(ri, ci)]


def _rotate(ink, degrees):
    if degrees == 0:
        return ink
    h, w = ink.shape
    t = math.radians(degrees)
    cos, sin = math.cos(t), math.sin(t)
    oh = int(math.ceil(abs(h * cos) + abs(w * sin)))
    ow = int(math.ceil(abs(w * cos) + abs(h * sin)))
    yy, xx = np.mgrid[0:oh, 0:ow]
    # inverse map output pixel centers back into the source
    y = yy + 0.5 - oh / 2
    x = xx + 0.5 - ow / 2
    sy = cos * y - sin * x + h / 2
    sx = sin * y + cos * x + w / 2
    r = np.floor(sy).astype(int)
    c = np.floor(sx).astype(int)
    inside = (r >= 0) & (r < h) & (c >= 0) & (c < w)
    out = np.zeros((oh, ow), dtype=np.uint8)
    out[inside] = ink[r[inside], c[inside]]
    return out


def _neighborhood(mask, combine):
    padded = np.pad(mask, 1, constant_values=0)
    h, w = mask.shape
    out = mask.copy()
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            out = combine(out, padded[1 + dy:1 + dy + h, 1 + dx:1 + dx + w])
    return out


def dilate(mask):
    return _neighborhood(mask, np.maximum)


def erode(mask):
    return _neighborhood(mask, np.minimum)


def _attempt(template, cfg, rng):
    ink = template.raster.pixels
    ink = _scale(ink, rng.uniform(*cfg.scale_range))
    ink = _rotate(ink, rng.uniform(-cfg.rotation_range, cfg.rotation_range))
    if not ink.any():
        return None
    ink = crop_to_content(BinaryImage(ink, Polarity.INK_IS_ONE)).pixels

    pad = cfg.margin + cfg.max_translation
    dy, dx = rng.integers(-cfg.max_translation, cfg.max_translation + 1, size=2)
    h, w = ink.shape
    canvas = np.zeros((h + 2 * pad, w + 2 * pad), dtype=np.uint8)
    canvas[pad + dy:pad + dy + h, pad + dx:pad + dx + w] = ink

    weights = np.asarray(cfg.morphology, dtype=np.float64)
    op = MORPHOLOGY[rng.choice(3, p=weights / weights.sum())]
    if op == "dilate":
        canvas = dilate(canvas)
    elif op == "erode":
        canvas = erode(canvas)
    if not canvas.any():
        return None

    page = render_page(BinaryImage(canvas, Polarity.INK_IS_ONE))
    if cfg.noise_prob > 0:
        hit = rng.random(page.shape) < cfg.noise_prob
        salt = rng.random(page.shape) < 0.5
        page = np.where(hit, np.where(salt, 255, 0), page).astype(np.uint8)
    return page


def perturb(template: GlyphTemplate, cfg: PerturbationConfig, rng: np.random.Generator) -> np.ndarray:
    """Distort a template into an 8-bit page (ink 0 on paper 255).

    Order: scale, rotate, translate onto a padded canvas, optional 1-px
    dilation or erosion, salt-and-pepper noise. Draws that erase all ink are
    retried from the same generator up to 10 times.
    """
    for _ in range(MAX_ATTEMPTS):
        page = _attempt(template, cfg, rng)
        if page is not None:
            return page
    raise PerturbationError(f"class {template.label.folder}: perturbation erased the glyph {MAX_ATTEMPTS} times")


def template_page(template: GlyphTemplate, margin: int = 2) -> np.ndarray:
    ink = np.pad(template.raster.pixels, margin)
    return render_page(BinaryImage(ink, Polarity.INK_IS_ONE))


@dataclass
class GenerationManifest:
    seed: int
    per_class: int
    config: PerturbationConfig
    entries: list[tuple[str, int]] = field(default_factory=list)
    failures: list[tuple[str, str]] = field(default_factory=list)

    def to_text(self) -> str:
        lines = [f"seed={self.seed}", f"prng={PRNG_ID}", f"per_class={self.per_class}"]
        lines += [f"config.{k}={v}" for k, v in self.config.items()]
        lines += [f"failed={path} {reason}" for path, reason in self.failures]
        lines += [f"{path} {draw}" for path, draw in self.entries]
        return "\n".join(lines) + "\n"


def _generate_class(out, template, per_class, cfg):
    entries, failures = [], []
    folder = out / template.label.folder
    folder.mkdir(parents=True, exist_ok=True)
    for j in range(per_class):
        rel = f"{template.label.folder}/{j:03d}.pgm"
        try:
            page = perturb(template, cfg, draw_rng(cfg.seed, template.label.id, j))
        except PerturbationError as exc:
            failures.append((rel, str(exc)))
            continue
        pnm.write_pgm(out / rel, page)
        entries.append((rel, j))
    return entries, failures


def generate_dataset(out: str | os.PathLike, per_class: int = 28, cfg: PerturbationConfig | None = None,
                     n_jobs: int = 1) -> GenerationManifest:
    """Write ``20 * per_class`` PGM scans plus ``labels.txt`` and ``manifest.txt``."""
    cfg = cfg or PerturbationConfig()
    if per_class < 1:
        raise ValueError("per_class must be at least 1")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    templates = load_templates()
    work = [(out, t, per_class, cfg) for t in templates]
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(lambda args: _generate_class(*args), work))
    else:
        results = [_generate_class(*args) for args in work]

    manifest = GenerationManifest(cfg.seed, per_class, cfg)
    for entries, failures in results:
        manifest.entries.extend(entries)
        manifest.failures.extend(failures)
    (out / "labels.txt").write_text(labels_manifest())
    (out / "manifest.txt").write_text(manifest.to_text())
    return manifest
