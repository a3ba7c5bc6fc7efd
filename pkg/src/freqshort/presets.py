"""Named search configurations and the plain-JSON config file format.

Config files carry the keys ``stages[].patch_size``, ``stages[].B``, ``p``,
``N`` and ``seed``. The CF presets are the published 32x32 budget ladder
(four stages, patch sizes 8/4/2/1); the 224x224 default uses six stages
down to 2x2 patches.
"""

from __future__ import annotations

import json
from pathlib import Path

from .errors import ConfigurationError
from .patches import SearchConfig, StagePlan

__all__ = [
    "available_presets",
    "preset",
    "default_patch_sizes",
    "load_config",
    "save_config",
]

DEFAULT_P = 0.6
DEFAULT_FANOUT = 5
DEFAULT_SEED = 42

_CIFAR_SIZES = (8, 4, 2, 1)
_IMAGENET_SIZES = (56, 28, 14, 8, 4, 2)

_CF_BUDGETS = {
    "cf-1": (1000, 2000, 4000, 8000),
    "cf-2.1": (200, 800, 4000, 4000),
    "cf-2.2": (200, 800, 2000, 2000),
    "cf-2.3": (200, 800, 500, 500),
    "cf-2.4": (200, 400, 500, 500),
    "cf-2.5": (200, 200, 500, 500),
    "cf-2.6": (200, 200, 300, 300),
    "cf-2.7": (100, 100, 200, 200),
    "cf-2.8": (50, 50, 100, 100),
    "cf-2.9": (20, 20, 50, 50),
    "cf-2.10": (10, 10, 25, 25),
}

_IMAGENET_BUDGETS = (500, 500, 500, 1000, 1000, 2000)


def _build(sizes, budgets, seed, preset_id) -> SearchConfig:
    stages = tuple(
        StagePlan(
            stage_index=i + 1,
            patch_size=ps,
            candidate_count=b,
            sampling_fraction=DEFAULT_P,
            parent_fanout=DEFAULT_FANOUT,
        )
        for i, (ps, b) in enumerate(zip(sizes, budgets))
    )
    return SearchConfig(stages=stages, seed=seed, preset_id=preset_id)


def available_presets() -> list[str]:
    return sorted(_CF_BUDGETS) + ["cifar-default", "imagenet-default"]


def preset(name: str, seed: int | None = None) -> SearchConfig:
    key = name.lower()
    seed = DEFAULT_SEED if seed is None else seed
    if key in _CF_BUDGETS:
        return _build(_CIFAR_SIZES, _CF_BUDGETS[key], seed, key)
    if key == "cifar-default":
        return _build(_CIFAR_SIZES, _CF_BUDGETS["cf-1"], seed, key)
    if key == "imagenet-default":
        return _build(_IMAGENET_SIZES, _IMAGENET_BUDGETS, seed, key)
    raise ConfigurationError(
        f"unknown preset {name!r}; available: {', '.join(available_presets())}"
    )


def default_patch_sizes(height: int, width: int) -> tuple[int, ...]:
    """Stage schedule for a new resolution: start at min(h, w)/4, halve down.

    The first stage tiles the spectrum 4x4; later stages halve the patch
    size while it stays even, ending at 1 when the ladder gets there.
    """
    start = min(height, width) // 4
    if start < 1 or height % start or width % start:
        raise ConfigurationError(
            f"no default schedule for {height}x{width}; provide a config file"
        )
    sizes = [start]
    while sizes[-1] > 1 and sizes[-1] % 2 == 0:
        sizes.append(sizes[-1] // 2)
    if len(sizes) < 2:
        raise ConfigurationError(
            f"default schedule for {height}x{width} has a single stage; "
            "provide a config file"
        )
    return tuple(sizes)


def load_config(name_or_path: str, seed: int | None = None) -> SearchConfig:
    """A preset name, or a JSON config file path."""
    path = Path(name_or_path)
    if path.suffix == ".json" or path.exists():
        try:
            data = json.loads(path.read_text())
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"bad JSON in config {path}: {exc}") from exc
        if seed is not None:
            data["seed"] = seed
        return SearchConfig.from_dict(data, preset_id=None)
    return preset(name_or_path, seed=seed)


def save_config(config: SearchConfig, path) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True))
