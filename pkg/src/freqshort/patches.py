"""Spectrum tiling into square patches and random subset sampling.

Each search stage tiles the spectrum with square patches of one size. The
base tiling is non-overlapping and covers the spectrum; for patch sizes >= 2
three extra tilings shifted by half a patch (horizontally, vertically,
diagonally) are pooled in as additional candidates, so that subsets can
cross base-tile borders. Sampling draws patches uniformly without
replacement against an area budget of k = round(p * base_count) full
patches, which keeps the covered fraction tracking p at every stage.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, SamplingError
from .spectral import FrequencyMask

__all__ = [
    "PatchPosition",
    "StagePlan",
    "SearchConfig",
    "build_grid",
    "eligible_patches",
    "intersecting_patches",
    "sample_subset",
    "round_half_up",
]


@dataclass(frozen=True)
class PatchPosition:
    """A square patch: top/left bin indices, side length, shifted-grid flag."""

    top: int
    left: int
    size: int
    shifted: bool = False

    @property
    def slices(self) -> tuple[slice, slice]:
        return slice(self.top, self.top + self.size), slice(self.left, self.left + self.size)

    @property
    def area(self) -> int:
        return self.size * self.size


@dataclass(frozen=True)
class StagePlan:
    """Per-stage hyperparameters of the hierarchical search."""

    stage_index: int            # 1-based
    patch_size: int
    candidate_count: int        # B_s
    sampling_fraction: float    # p, in (0, 1]
    parent_fanout: int = 5      # N; ignored at the final stage

    def __post_init__(self):
        if self.stage_index < 1:
            raise ConfigurationError("stage_index is 1-based")
        if self.patch_size < 1:
            raise ConfigurationError("patch_size must be >= 1")
        if self.candidate_count < 1:
            raise ConfigurationError("candidate count B must be positive")
        if not (0.0 < self.sampling_fraction <= 1.0):
            raise ConfigurationError("sampling fraction p must be in (0, 1]")
        if self.parent_fanout < 1:
            raise ConfigurationError("parent fan-out N must be positive")


@dataclass(frozen=True)
class SearchConfig:
    """Ordered stage schedule plus the seed that drives every draw."""

    stages: tuple[StagePlan, ...]
    seed: int = 42
    preset_id: str | None = None

    def __post_init__(self):
        stages = tuple(self.stages)
        object.__setattr__(self, "stages", stages)
        if len(stages) < 2:
            raise ConfigurationError("a search needs at least 2 stages")
        sizes = [s.patch_size for s in stages]
        if any(b >= a for a, b in zip(sizes, sizes[1:])):
            raise ConfigurationError(f"patch sizes must strictly decrease, got {sizes}")
        if sizes[-1] < 1:
            raise ConfigurationError("final stage patch_size must be >= 1")

    def validate_for(self, height: int, width: int) -> None:
        """Reject schedules that do not tile a height x width spectrum."""
        for plan in self.stages:
            if height % plan.patch_size or width % plan.patch_size:
                raise ConfigurationError(
                    f"stage {plan.stage_index}: {height}x{width} spectrum is not "
                    f"divisible by patch size {plan.patch_size}"
                )

    @property
    def total_candidates(self) -> int:
        return sum(s.candidate_count for s in self.stages)

    def to_dict(self) -> dict:
        return {
            "p": self.stages[0].sampling_fraction,
            "N": self.stages[0].parent_fanout,
            "seed": self.seed,
            "stages": [
                {"patch_size": s.patch_size, "B": s.candidate_count}
                for s in self.stages
            ],
        }

    @classmethod
    def from_dict(cls, data: dict, *, preset_id: str | None = None) -> "SearchConfig":
        try:
            p = float(data["p"])
            fanout = int(data.get("N", 5))
            seed = int(data.get("seed", 42))
            stages = tuple(
                StagePlan(
                    stage_index=i + 1,
                    patch_size=int(entry["patch_size"]),
                    candidate_count=int(entry["B"]),
                    sampling_fraction=p,
                    parent_fanout=fanout,
                )
                for i, entry in enumerate(data["stages"])
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"bad search config: {exc}") from exc
        return cls(stages=stages, seed=seed, preset_id=preset_id)

    @property
    def config_hash(self) -> str:
        """Stable digest of the full configuration, seed included."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def round_half_up(x: float) -> int:
    """round() with deterministic .5-up ties (no banker's rounding)."""
    return int(np.floor(x + 0.5))


def build_grid(
    height: int, width: int, patch_size: int, include_shifted: bool = True
) -> list[PatchPosition]:
    """All patch positions of one size: base tiling plus half-shifted tilings.

    The base tiling covers the spectrum exactly. When ``include_shifted`` and
    patch_size >= 2, tilings offset by patch_size/2 horizontally, vertically
    and diagonally are appended, keeping only patches that lie fully inside
    the spectrum (a shifted tiling loses one row and/or column of patches).
    A 1x1 patch has no half shift, so its grid is base-only.
    """
    if height % patch_size or width % patch_size:
        raise ConfigurationError(
            f"{height}x{width} spectrum is not divisible by patch size {patch_size}"
        )
    grid = [
        PatchPosition(top, left, patch_size)
        for top in range(0, height, patch_size)
        for left in range(0, width, patch_size)
    ]
    if include_shifted and patch_size >= 2:
        half = patch_size // 2
        offsets = ((0, half), (half, 0), (half, half))
        for dy, dx in offsets:
            grid.extend(
                PatchPosition(top, left, patch_size, shifted=True)
                for top in range(dy, height - patch_size + 1, patch_size)
                for left in range(dx, width - patch_size + 1, patch_size)
            )
    return grid


def _patch_bin_counts(grid: Sequence[PatchPosition], bits: np.ndarray) -> np.ndarray:
    """Set-bin count inside every patch, via an integral image."""
    height, width = bits.shape
    integral = np.zeros((height + 1, width + 1), dtype=np.int64)
    integral[1:, 1:] = bits.cumsum(axis=0).cumsum(axis=1)
    tops = np.fromiter((p.top for p in grid), dtype=np.int64, count=len(grid))
    lefts = np.fromiter((p.left for p in grid), dtype=np.int64, count=len(grid))
    sizes = np.fromiter((p.size for p in grid), dtype=np.int64, count=len(grid))
    return (
        integral[tops + sizes, lefts + sizes]
        - integral[tops, lefts + sizes]
        - integral[tops + sizes, lefts]
        + integral[tops, lefts]
    )


def eligible_patches(
    grid: Sequence[PatchPosition], parent: FrequencyMask
) -> list[PatchPosition]:
    """Patches whose bins are all set in the parent mask."""
    if not grid:
        return []
    counts = _patch_bin_counts(grid, parent.bits)
    full = np.fromiter((p.area for p in grid), dtype=np.int64, count=len(grid))
    return [pos for pos, keep in zip(grid, counts == full) if keep]


def intersecting_patches(
    grid: Sequence[PatchPosition], parent: FrequencyMask
) -> list[PatchPosition]:
    """Patches sharing at least one set bin with the parent mask."""
    if not grid:
        return []
    counts = _patch_bin_counts(grid, parent.bits)
    return [pos for pos, keep in zip(grid, counts > 0) if keep]


def sample_subset(
    eligible: Sequence[PatchPosition],
    base_count_in_parent: int,
    p: float,
    rng: np.random.Generator,
    *,
    shape: tuple[int, int] | None = None,
    within: FrequencyMask | None = None,
) -> FrequencyMask:
    """Random union of patches covering ~p of the parent area.

    k = round(p * base_count_in_parent) full patches set the area budget
    (k * patch_area bins). Patches are drawn uniformly without replacement
    from the pooled eligible list (base and shifted together); a draw whose
    fresh bins would push the union past the budget is skipped and the scan
    continues with later draws. On non-overlapping base-only pools this
    reduces to picking exactly k patches.

    ``within`` clips contributions to a parent mask and provides the output
    shape; pass ``shape`` instead when sampling against the full spectrum.
    Deterministic given the generator state.
    """
    if not (0.0 < p <= 1.0):
        raise ConfigurationError("sampling fraction p must be in (0, 1]")
    if not eligible:
        raise SamplingError("no eligible patches to sample from")
    if within is not None:
        shape = within.bits.shape
    if shape is None:
        raise ConfigurationError("sample_subset needs `shape` or `within`")

    size = eligible[0].size
    if any(pos.size != size for pos in eligible):
        raise ConfigurationError("eligible patches must share one size")
    patch_area = size * size
    k = round_half_up(p * base_count_in_parent)
    if k < 1:
        raise SamplingError(
            f"sample size k = round({p} * {base_count_in_parent}) is zero"
        )
    budget = k * patch_area

    bits = np.zeros(shape, dtype=bool)
    clip = within.bits if within is not None else None
    covered = 0
    for idx in rng.permutation(len(eligible)):
        if covered == budget:
            break
        ys, xs = eligible[idx].slices
        region = bits[ys, xs]
        fresh = ~region
        if clip is not None:
            fresh &= clip[ys, xs]
        gain = int(fresh.sum())
        if gain == 0 or covered + gain > budget:
            continue
        region |= fresh
        covered += gain

    # Shortfall beyond one patch means the pool cannot reach the target
    # (for base-only pools this is exactly the k > |eligible| condition).
    if covered <= budget - patch_area:
        raise SamplingError(
            f"sampled {covered} bins, target {budget}: pool of {len(eligible)} "
            f"patches is too small for p={p}"
        )
    return FrequencyMask(bits)
