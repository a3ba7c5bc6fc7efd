import numpy as np
import pytest

from freqshort import (
    ConfigurationError,
    EvaluationDataset,
    add_level_pair,
    build_planted_oracle,
    class_tpr,
    compare_groups,
    evaluate_datasets,
    generate_planted,
    make_band_spec,
    rendition_variant,
    run_search,
    select_eval_subset,
    texture_variant,
)
from freqshort.harness import (
    ROLE_ADVERSARIAL,
    ROLE_ID_TEST,
    ROLE_OOD_RENDITION,
    ROLE_OOD_TEXTURE,
)
from freqshort.presets import preset
from freqshort.patches import SearchConfig, StagePlan


def tiny_config(seed=200):
    return SearchConfig(
        stages=tuple(
            StagePlan(i + 1, ps, b, 0.6, 5)
            for i, (ps, b) in enumerate(zip((8, 4, 2, 1), (10, 10, 25, 25)))
        ),
        seed=seed,
    )


@pytest.fixture(scope="module")
def contrast_world():
    """Two band classes + a hi/lo level pair, searched maps, OOD variants."""
    spec = add_level_pair(
        make_band_spec(num_classes=2, train_per_class=60, test_per_class=60, seed=19)
    )
    train, test, truth = generate_planted(spec)
    endpoint = build_planted_oracle(spec, train)
    eval_set = select_eval_subset(train, test.per_class_counts(), seed=4)
    dfms, _ = run_search(tiny_config(), endpoint, eval_set)

    _, texture_test, _ = generate_planted(texture_variant(spec, seed=301))
    _, rendition_test, _ = generate_planted(rendition_variant(spec, seed=302))
    return spec, endpoint, dfms, test, texture_test, rendition_test


def run_of(endpoint, dfms, datasets, thresholds=None):
    return evaluate_datasets(endpoint, dfms, datasets, thresholds=thresholds)


class TestEvaluateDatasets:
    def test_id_grouping_finds_shortcut_and_control_classes(self, contrast_world):
        spec, endpoint, dfms, test, *_ = contrast_world
        run = run_of(endpoint, dfms, [EvaluationDataset("id", test, ROLE_ID_TEST)])
        sct, non = run.id_grouping[0.5]
        names = [test.class_names[i] for i in sct]
        assert "class0" in names and "class1" in names and "broad-lo" in names
        assert [test.class_names[i] for i in non] == ["broad-hi"]
        row = run.result("id").report.row(0.5)
        assert row.avg_tpr_dfm_sct >= 0.9
        assert row.avg_tpr_dfm_non <= 0.1

    def test_grouping_reused_verbatim_on_ood(self, contrast_world):
        spec, endpoint, dfms, test, texture_test, rendition_test = contrast_world
        run = run_of(endpoint, dfms, [
            EvaluationDataset("id", test, ROLE_ID_TEST),
            EvaluationDataset("tex", texture_test, ROLE_OOD_TEXTURE),
            EvaluationDataset("ren", rendition_test, ROLE_OOD_RENDITION),
        ])
        for name in ("tex", "ren"):
            report = run.result(name).report
            for row in report.rows:
                id_sct, id_non = run.id_grouping[row.threshold]
                assert set(row.shortcut_classes) <= set(id_sct)
                assert set(row.nonshortcut_classes) <= set(id_non)
                # full-coverage OOD sets reuse the partition byte for byte
                assert row.shortcut_classes == id_sct
                assert row.nonshortcut_classes == id_non

    def test_texture_preserving_keeps_shortcut_group(self, contrast_world):
        spec, endpoint, dfms, test, texture_test, _ = contrast_world
        run = run_of(endpoint, dfms, [
            EvaluationDataset("id", test, ROLE_ID_TEST),
            EvaluationDataset("tex", texture_test, ROLE_OOD_TEXTURE),
        ])
        id_row = run.result("id").report.row(0.5)
        tex_row = run.result("tex").report.row(0.5)
        assert abs(tex_row.avg_tpr_sct - id_row.avg_tpr_sct) <= 0.05

    def test_rendition_inverts_group_order(self, contrast_world):
        spec, endpoint, dfms, test, _, rendition_test = contrast_world
        run = run_of(endpoint, dfms, [
            EvaluationDataset("id", test, ROLE_ID_TEST),
            EvaluationDataset("ren", rendition_test, ROLE_OOD_RENDITION),
        ])
        id_row = run.result("id").report.row(0.5)
        ren_row = run.result("ren").report.row(0.5)
        assert id_row.avg_tpr_sct >= id_row.avg_tpr_non - 0.05
        assert ren_row.avg_tpr_sct <= ren_row.avg_tpr_non - 0.2

    def test_filtering_parity_with_direct_call(self, contrast_world):
        spec, endpoint, dfms, test, *_ = contrast_world
        run = run_of(endpoint, dfms, [EvaluationDataset("id", test, ROLE_ID_TEST)])
        result = run.result("id")
        for c, name in enumerate(test.class_names):
            sel = test.class_indices(c)
            direct = class_tpr(
                endpoint, test.images[sel], test.labels[sel], mask=dfms.masks[name]
            )[c]
            assert result.tpr_dfm[c] == direct

    def test_partial_class_ood_uses_intersection(self, contrast_world):
        spec, endpoint, dfms, test, texture_test, _ = contrast_world
        keep = np.flatnonzero(texture_test.labels != 0)  # drop class0 images
        partial = texture_test.subset(keep)
        run = run_of(endpoint, dfms, [
            EvaluationDataset("id", test, ROLE_ID_TEST),
            EvaluationDataset("partial", partial, ROLE_OOD_TEXTURE),
        ])
        result = run.result("partial")
        assert np.isnan(result.tpr[0]) and np.isnan(result.tpr_dfm[0])
        assert "class0" not in result.evaluated_classes
        id_row = run.result("id").report.row(0.5)
        partial_row = result.report.row(0.5)
        assert partial_row.shortcut_count == id_row.shortcut_count - 1

    def test_alias_maps_foreign_class_names(self, contrast_world):
        spec, endpoint, dfms, test, texture_test, _ = contrast_world
        renamed = texture_test
        renamed = type(renamed)(
            tuple(f"other-{n}" for n in renamed.class_names),
            renamed.images, renamed.labels,
        )
        alias = {f"other-{n}": n for n in test.class_names}
        run = run_of(endpoint, dfms, [
            EvaluationDataset("id", test, ROLE_ID_TEST),
            EvaluationDataset("renamed", renamed, ROLE_OOD_TEXTURE, alias=alias),
        ])
        assert set(run.result("renamed").evaluated_classes) == set(test.class_names)

    def test_zero_overlap_is_error(self, contrast_world):
        spec, endpoint, dfms, test, texture_test, _ = contrast_world
        foreign = type(test)(
            tuple(f"x-{n}" for n in test.class_names), test.images, test.labels
        )
        with pytest.raises(ConfigurationError):
            run_of(endpoint, dfms, [
                EvaluationDataset("id", test, ROLE_ID_TEST),
                EvaluationDataset("foreign", foreign, ROLE_OOD_TEXTURE),
            ])

    def test_adversarial_role_is_just_another_dataset(self, contrast_world):
        # pre-generated attack sets flow through like any other OOD tree
        spec, endpoint, dfms, test, texture_test, _ = contrast_world
        run = run_of(endpoint, dfms, [
            EvaluationDataset("id", test, ROLE_ID_TEST),
            EvaluationDataset("attacked", texture_test, ROLE_ADVERSARIAL),
        ])
        result = run.result("attacked")
        assert result.role == ROLE_ADVERSARIAL
        assert len(result.report.rows) == len(run.thresholds)

    def test_exactly_one_id_dataset_required(self, contrast_world):
        spec, endpoint, dfms, test, *_ = contrast_world
        with pytest.raises(ConfigurationError):
            run_of(endpoint, dfms, [EvaluationDataset("t", test, ROLE_OOD_TEXTURE)])

    def test_unknown_role_rejected(self, contrast_world):
        *_, test, _, _ = contrast_world
        with pytest.raises(ConfigurationError):
            EvaluationDataset("bad", test, "weird-role")


class TestCompareGroups:
    def test_signs_flip_between_texture_and_rendition(self, contrast_world):
        spec, endpoint, dfms, test, texture_test, rendition_test = contrast_world
        run = run_of(endpoint, dfms, [
            EvaluationDataset("id", test, ROLE_ID_TEST),
            EvaluationDataset("tex", texture_test, ROLE_OOD_TEXTURE),
            EvaluationDataset("ren", rendition_test, ROLE_OOD_RENDITION),
        ])
        rows = compare_groups(run)
        by_key = {(r["dataset"], r["threshold"]): r for r in rows}
        assert by_key[("tex", 0.5)]["sct_minus_non_sign"] in ("+", "0")
        assert by_key[("ren", 0.5)]["sct_minus_non_sign"] == "-"

    def test_identical_datasets_zero_delta(self, contrast_world):
        spec, endpoint, dfms, test, *_ = contrast_world
        run = run_of(endpoint, dfms, [
            EvaluationDataset("id", test, ROLE_ID_TEST),
            EvaluationDataset("same", test, ROLE_OOD_TEXTURE),
        ])
        a = run.result("id").report
        b = run.result("same").report
        for ra, rb in zip(a.rows, b.rows):
            for attr in ("avg_tpr_sct", "avg_tpr_dfm_sct", "avg_tpr_non", "avg_tpr_dfm_non"):
                va, vb = getattr(ra, attr), getattr(rb, attr)
                assert (np.isnan(va) and np.isnan(vb)) or va == vb

    def test_empty_group_yields_nan_markers(self, contrast_world):
        spec, endpoint, dfms, test, *_ = contrast_world
        run = run_of(endpoint, dfms, [EvaluationDataset("id", test, ROLE_ID_TEST)],
                     thresholds=(0.1, 0.99999 - 1e-9))
        # at a threshold just under 1 every class with tpr_dfm == 1 is still
        # shortcut; craft one where the non-shortcut group is empty instead
        row = run.result("id").report.row(0.1)
        if row.nonshortcut_count == 0:
            assert np.isnan(row.avg_tpr_non)
