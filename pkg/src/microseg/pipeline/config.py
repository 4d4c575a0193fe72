"""Pipeline configuration from TOML or JSON files."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from ..segmenter import SegmenterConfig, TrainSchedule
from ..skill import Protocol
from ..tracking import FusionConfig, NoiseModel

STAGES = ("synth", "segment", "track", "features", "assess", "evaluate")


@dataclass
class SynthConfig:
    demo_skill: float = 0.6
    frame_hw: tuple = (8, 8)
    cohort_size: int = 60
    noise: dict = field(default_factory=lambda: {"dropout": 0.05, "label_flip": 0.2, "bbox_jitter": 1.0})
    gaps: list = field(default_factory=lambda: [[], []])  # per object: [start, stop) frame ranges


@dataclass
class SegmentConfig:
    checkpoint: str = ""  # existing checkpoint to load; train when empty
    train_clips: int = 420
    min_len: int = 5
    grammar: str = ""  # grammar JSON; built-in default when empty
    batch_size: int = 64


@dataclass
class PipelineConfig:
    seed: int = 0
    fps: float = 10.0
    synth: SynthConfig = field(default_factory=SynthConfig)
    segmenter: SegmenterConfig = field(default_factory=lambda: SegmenterConfig(
        frames_T=8, patch_P=4, frame_H=8, frame_W=8, embed_d=32, num_blocks=1, num_heads=4, dropout=0.0))
    training: TrainSchedule = field(default_factory=lambda: TrainSchedule(
        epochs=20, lr=2e-3, layer_decay=1.0, augment_roll=True, lr_schedule="cosine"))
    segment: SegmentConfig = field(default_factory=SegmentConfig)
    tracking: FusionConfig = field(default_factory=FusionConfig)
    classifier: Protocol = field(default_factory=Protocol)

    def noise_model(self) -> NoiseModel:
        return NoiseModel(**self.synth.noise)


def _build(default, doc: dict, where: str):
    """Override fields of the section's ``default`` instance with ``doc``."""
    cls = type(default)
    if not isinstance(doc, dict):
        raise ValueError(f"[{where}] must be a table")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ValueError(f"[{where}] unknown keys: {', '.join(unknown)}")
    merged = {f.name: getattr(default, f.name) for f in fields(cls)}
    if "frames_T" in doc and "local_windows" not in doc and "local_windows" in merged:
        merged["local_windows"] = None  # re-derive from the new window length
    merged.update({k: tuple(v) if isinstance(v, list) and k.endswith(("_grid", "hw")) else v
                   for k, v in doc.items()})
    try:
        return cls(**merged)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"[{where}] {exc}") from exc


SECTIONS = ("synth", "segmenter", "training", "segment", "tracking", "classifier")


def config_from_dict(doc: dict) -> PipelineConfig:
    unknown = sorted(set(doc) - set(SECTIONS) - {"seed", "fps"})
    if unknown:
        raise ValueError(f"unknown top-level config keys: {', '.join(unknown)}")
    cfg = PipelineConfig()
    for key in SECTIONS:
        if key in doc:
            setattr(cfg, key, _build(getattr(cfg, key), doc[key], key))
    if "seed" in doc:
        cfg.seed = int(doc["seed"])
    if "fps" in doc:
        cfg.fps = float(doc["fps"])
    if cfg.fps <= 0:
        raise ValueError("fps must be positive")
    return cfg


def load_config(path) -> PipelineConfig:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file {path} not found")
    text = path.read_text()
    try:
        doc = json.loads(text) if path.suffix == ".json" else tomllib.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ValueError(f"{path}: {exc}") from exc
    return config_from_dict(doc)


def stage_rng(seed: int, stage: str) -> np.random.Generator:
    """Independent generator per stage, derived from the root seed."""
    return np.random.default_rng(np.random.SeedSequence([seed, STAGES.index(stage)]))


def demo_config_path() -> Path:
    return Path(__file__).with_name("demo.toml")
