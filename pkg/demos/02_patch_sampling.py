"""Patch grids and the coverage arithmetic of staged sampling.

Shows the pooled base + half-shifted tilings, then chains one sampled mask
per stage to demonstrate that coverage after stage s tracks p^s on both the
32x32 and the 224x224 schedules (including the non-halving 14 -> 8 step).
"""

import numpy as np

from freqshort import build_grid, preset, sample_mask_lineage

grid = build_grid(32, 32, 8)
base = sum(not p.shifted for p in grid)
print(f"32x32 spectrum, 8x8 patches: {base} base + {len(grid) - base} shifted = {len(grid)}")

for name, size in (("cf-2.10", 32), ("imagenet-default", 224)):
    config = preset(name)
    print(f"\n{name} on {size}x{size} (p = 0.6): coverage per stage vs p^s")
    coverages = {plan.stage_index: [] for plan in config.stages}
    for seed in range(20):
        for plan, mask in zip(config.stages, sample_mask_lineage(config, size, size, seed=seed)):
            coverages[plan.stage_index].append(mask.coverage)
    for plan in config.stages:
        mean = np.mean(coverages[plan.stage_index])
        target = 0.6 ** plan.stage_index
        print(f"  stage {plan.stage_index} (patch {plan.patch_size:3d}):"
              f" mean {mean:.4f}   p^s {target:.4f}")
