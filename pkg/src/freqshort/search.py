"""Staged hierarchical search for dominant frequency maps.

Stage 1 samples candidate subsets over the full spectrum and scores each one
once over the whole evaluation set, producing per-class losses in a single
pass. Later stages refine per class: each candidate picks one of the class's
top-N parents, samples a smaller-patch subset inside it, and is scored on
that class's images only. The final stage keeps the top-1 mask per class.

Every random draw derives from a per-(stage, class, candidate) substream of
the root seed, and candidates are merged by index after evaluation, so
results do not depend on worker count or scheduling order.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .datasets import LabeledDataset
from .errors import ConfigurationError, DataError, SamplingError
from .models import ClassifierEndpoint, class_losses
from .patches import (
    PatchPosition,
    SearchConfig,
    StagePlan,
    build_grid,
    intersecting_patches,
    round_half_up,
    sample_subset,
)
from .spectral import FrequencyMask

__all__ = [
    "CandidateRecord",
    "DFMSet",
    "SearchTrace",
    "run_stage_one",
    "run_refinement_stage",
    "run_search",
    "select_eval_subset",
    "sample_mask_lineage",
]

TRACE_POINTS_MAX = 512
_STAGE_ONE_CLASS = 0x7FFFFFFF  # substream slot for class-independent draws


@dataclass
class CandidateRecord:
    """One evaluated candidate subset."""

    stage: int
    candidate_index: int
    mask: FrequencyMask
    class_index: int | None = None      # None for shared stage-1 candidates
    parent_index: int | None = None     # candidate_index of the parent record
    losses: np.ndarray | None = None    # per-class losses (stage 1)
    loss: float | None = None           # single-class loss (stage >= 2)


@dataclass
class DFMSet:
    """Final top-1 mask per class plus lineage and bookkeeping."""

    class_names: tuple[str, ...]
    height: int
    width: int
    masks: dict[str, FrequencyMask]
    final_loss: dict[str, float]
    lineage: dict[str, list[int]]       # candidate index chain, stage 1..S
    config_hash: str
    seed: int

    def coverage(self) -> dict[str, float]:
        return {name: self.masks[name].coverage for name in self.class_names}


@dataclass
class SearchTrace:
    """Best-loss-so-far curves and the evaluation budget audit."""

    best_loss: dict[tuple[int, str], list[tuple[int, float]]] = field(default_factory=dict)
    images_processed: int = 0
    candidates_evaluated: int = 0
    wall_seconds: float = 0.0

    def record_stage(self, stage: int, class_name: str, losses: np.ndarray) -> None:
        running = np.minimum.accumulate(losses)
        n = len(running)
        if n > TRACE_POINTS_MAX:
            keep = np.unique(np.linspace(0, n - 1, TRACE_POINTS_MAX).astype(int))
        else:
            keep = np.arange(n)
        self.best_loss[(stage, class_name)] = [
            (int(i + 1), float(running[i])) for i in keep
        ]


def _rng_for(seed: int, stage: int, class_slot: int, candidate: int) -> np.random.Generator:
    ss = np.random.SeedSequence((seed, stage, class_slot, candidate))
    return np.random.Generator(np.random.PCG64(ss))


def _rank(losses: np.ndarray, top: int) -> np.ndarray:
    """Indices of the `top` lowest losses; ties broken by lower index."""
    order = np.lexsort((np.arange(len(losses)), losses))
    return order[:top]


def _map_candidates(fn, items, workers: int):
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def run_stage_one(
    config: SearchConfig,
    endpoint: ClassifierEndpoint,
    eval_set: LabeledDataset,
    trace: SearchTrace | None = None,
    workers: int = 1,
) -> list[list[CandidateRecord]]:
    """Shared coarse stage: B_1 subsets over the full spectrum, scored once
    over the entire eval set; returns each class's top-N candidates."""
    plan = config.stages[0]
    if plan.candidate_count < plan.parent_fanout:
        raise ConfigurationError(
            f"stage 1 needs B >= N ({plan.candidate_count} < {plan.parent_fanout})"
        )
    counts = np.bincount(eval_set.labels, minlength=eval_set.class_count)
    if (counts == 0).any():
        missing = [eval_set.class_names[i] for i in np.flatnonzero(counts == 0)]
        raise DataError(f"eval set misses classes: {', '.join(missing)}")

    height, width = eval_set.image_shape[1:]
    full = FrequencyMask.full(height, width)
    grid = build_grid(height, width, plan.patch_size)
    base_count = (height // plan.patch_size) * (width // plan.patch_size)

    candidates = []
    for i in range(plan.candidate_count):
        rng = _rng_for(config.seed, 1, _STAGE_ONE_CLASS, i)
        mask = sample_subset(grid, base_count, plan.sampling_fraction, rng, within=full)
        mask.stage = 1
        candidates.append(CandidateRecord(stage=1, candidate_index=i, mask=mask))

    def evaluate(record: CandidateRecord) -> np.ndarray:
        return class_losses(endpoint, eval_set.images, eval_set.labels, record.mask)

    all_losses = _map_candidates(evaluate, candidates, workers)
    for record, losses in zip(candidates, all_losses):
        record.losses = losses

    per_class = []
    loss_matrix = np.stack(all_losses)  # (B, K)
    for c in range(eval_set.class_count):
        order = _rank(loss_matrix[:, c], plan.parent_fanout)
        per_class.append([candidates[i] for i in order])
        if trace is not None:
            trace.record_stage(1, eval_set.class_names[c], loss_matrix[:, c])
    if trace is not None:
        trace.candidates_evaluated += plan.candidate_count
    return per_class


def _refine_candidate(
    plan: StagePlan,
    parents: list[CandidateRecord],
    pools: list[tuple[list[PatchPosition], int]],
    seed: int,
    class_index: int,
    candidate_index: int,
) -> CandidateRecord:
    """Build one refinement candidate: pick a parent, sample inside it.

    A degenerate draw (parent too small for the patch budget) retries with a
    freshly chosen parent, up to B_s times.
    """
    rng = _rng_for(seed, plan.stage_index, class_index, candidate_index)
    last_error: SamplingError | None = None
    for _ in range(max(plan.candidate_count, 1)):
        parent_slot = int(rng.integers(len(parents)))
        parent = parents[parent_slot]
        pool, base_equiv = pools[parent_slot]
        try:
            mask = sample_subset(
                pool, base_equiv, plan.sampling_fraction, rng, within=parent.mask
            )
        except SamplingError as exc:
            last_error = exc
            continue
        mask.stage = plan.stage_index
        mask.parent_id = parent.candidate_index
        return CandidateRecord(
            stage=plan.stage_index,
            candidate_index=candidate_index,
            mask=mask,
            class_index=class_index,
            parent_index=parent.candidate_index,
        )
    raise SamplingError(
        f"stage {plan.stage_index}, class {class_index}: no parent admits a "
        f"sample after {plan.candidate_count} retries ({last_error})"
    )


def run_refinement_stage(
    plan: StagePlan,
    parents_per_class: list[list[CandidateRecord]],
    endpoint: ClassifierEndpoint,
    eval_set: LabeledDataset,
    seed: int,
    final: bool = False,
    trace: SearchTrace | None = None,
    workers: int = 1,
) -> list[list[CandidateRecord]]:
    """One refinement stage; returns top-N per class (top-1 when final)."""
    height, width = eval_set.image_shape[1:]
    grid = build_grid(height, width, plan.patch_size)
    keep = 1 if final else plan.parent_fanout

    patch_area = plan.patch_size * plan.patch_size
    per_class_out = []
    for c, parents in enumerate(parents_per_class):
        if not parents:
            raise ConfigurationError(f"class {eval_set.class_names[c]} has no parents")
        pools = [
            (
                intersecting_patches(grid, parent.mask),
                round_half_up(parent.mask.count / patch_area),
            )
            for parent in parents
        ]
        records = [
            _refine_candidate(plan, parents, pools, seed, c, i)
            for i in range(plan.candidate_count)
        ]
        sel = eval_set.class_indices(c)
        images, labels = eval_set.images[sel], eval_set.labels[sel]

        def evaluate(record: CandidateRecord) -> float:
            losses = class_losses(endpoint, images, labels, record.mask)
            return float(losses[record.class_index])

        losses = np.asarray(_map_candidates(evaluate, records, workers))
        for record, loss in zip(records, losses):
            record.loss = loss
        order = _rank(losses, keep)
        per_class_out.append([records[i] for i in order])
        if trace is not None:
            trace.record_stage(plan.stage_index, eval_set.class_names[c], losses)
            trace.candidates_evaluated += plan.candidate_count
    return per_class_out


def run_search(
    config: SearchConfig,
    endpoint: ClassifierEndpoint,
    eval_set: LabeledDataset,
    workers: int = 1,
) -> tuple[DFMSet, SearchTrace]:
    """Full staged search; returns the per-class maps and the search trace.

    Total images pushed through the endpoint equal
    ``len(eval_set) * sum(B_s)`` exactly: the shared stage sees every image
    once per candidate, and refinement candidates see only their class.
    """
    height, width = eval_set.image_shape[1:]
    config.validate_for(height, width)
    trace = SearchTrace()
    counter_start = endpoint.images_processed
    started = time.perf_counter()

    tops = run_stage_one(config, endpoint, eval_set, trace=trace, workers=workers)
    history: list[list[list[CandidateRecord]]] = [tops]
    for si, plan in enumerate(config.stages[1:], start=2):
        final = si == len(config.stages)
        tops = run_refinement_stage(
            plan, tops, endpoint, eval_set, seed=config.seed,
            final=final, trace=trace, workers=workers,
        )
        history.append(tops)

    masks, final_loss, lineage = {}, {}, {}
    for c, name in enumerate(eval_set.class_names):
        best = tops[c][0]
        masks[name] = best.mask
        final_loss[name] = float(best.loss)
        chain = [best.candidate_index]
        parent_idx = best.parent_index
        for stage_records in reversed(history[:-1]):
            pool = stage_records[c]
            match = next(r for r in pool if r.candidate_index == parent_idx)
            chain.append(match.candidate_index)
            parent_idx = match.parent_index
        lineage[name] = list(reversed(chain))

    trace.images_processed = endpoint.images_processed - counter_start
    trace.wall_seconds = time.perf_counter() - started
    dfms = DFMSet(
        class_names=eval_set.class_names,
        height=height,
        width=width,
        masks=masks,
        final_loss=final_loss,
        lineage=lineage,
        config_hash=config.config_hash,
        seed=config.seed,
    )
    return dfms, trace


def select_eval_subset(
    train: LabeledDataset,
    per_class_counts: dict[str, int],
    seed: int,
) -> LabeledDataset:
    """Stratified train subset whose per-class counts mirror the test set."""
    chosen = []
    deficient = []
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, 0xE7A1))))
    for c, name in enumerate(train.class_names):
        want = int(per_class_counts.get(name, 0))
        pool = train.class_indices(c)
        if want > pool.size:
            deficient.append(f"{name} (have {pool.size}, need {want})")
            continue
        picked = rng.choice(pool, size=want, replace=False)
        chosen.append(np.sort(picked))
    if deficient:
        raise DataError(f"train set too small for classes: {', '.join(deficient)}")
    return train.subset(np.concatenate(chosen))


def sample_mask_lineage(
    config: SearchConfig, height: int, width: int, seed: int | None = None
) -> list[FrequencyMask]:
    """Model-free dry run: chain one sampled mask per stage.

    Useful for coverage studies — the returned masks have exactly the
    coverage statistics of search candidates at each stage.
    """
    config.validate_for(height, width)
    seed = config.seed if seed is None else seed
    parent = FrequencyMask.full(height, width)
    out = []
    for plan in config.stages:
        rng = _rng_for(seed, plan.stage_index, _STAGE_ONE_CLASS, 0)
        grid = build_grid(height, width, plan.patch_size)
        pool = intersecting_patches(grid, parent)
        base_equiv = round_half_up(parent.count / (plan.patch_size ** 2))
        mask = sample_subset(pool, base_equiv, plan.sampling_fraction, rng, within=parent)
        mask.stage = plan.stage_index
        out.append(mask)
        parent = mask
    return out
