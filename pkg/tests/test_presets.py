import json

import pytest

from freqshort import ConfigurationError, load_config, preset, save_config
from freqshort.presets import available_presets, default_patch_sizes


class TestPresets:
    def test_budget_ladder_totals(self):
        totals = {
            "cf-1": 15000, "cf-2.1": 9000, "cf-2.2": 5000, "cf-2.3": 2000,
            "cf-2.4": 1600, "cf-2.5": 1400, "cf-2.6": 1000, "cf-2.7": 600,
            "cf-2.8": 300, "cf-2.9": 140, "cf-2.10": 70,
        }
        for name, total in totals.items():
            config = preset(name)
            assert config.total_candidates == total
            assert tuple(s.patch_size for s in config.stages) == (8, 4, 2, 1)
            assert all(s.sampling_fraction == 0.6 for s in config.stages)

    def test_platform_defaults(self):
        assert preset("cifar-default").total_candidates == 15000
        imagenet = preset("imagenet-default")
        assert tuple(s.patch_size for s in imagenet.stages) == (56, 28, 14, 8, 4, 2)
        assert tuple(s.candidate_count for s in imagenet.stages) == (
            500, 500, 500, 1000, 1000, 2000
        )

    def test_unknown_preset_lists_names(self):
        with pytest.raises(ConfigurationError, match="cf-2.10"):
            preset("bogus")

    def test_all_listed_presets_construct(self):
        for name in available_presets():
            preset(name)

    def test_seed_override(self):
        assert preset("cf-2.10", seed=9).seed == 9


class TestDefaultSchedule:
    def test_known_resolutions(self):
        assert default_patch_sizes(32, 32) == (8, 4, 2, 1)
        assert default_patch_sizes(16, 16) == (4, 2, 1)
        assert default_patch_sizes(64, 64) == (16, 8, 4, 2, 1)

    def test_nonsquare_uses_short_side(self):
        assert default_patch_sizes(32, 64) == (8, 4, 2, 1)

    def test_odd_ladder_stops_at_odd_size(self):
        # 224/4 = 56 halves down to 7, which cannot halve further
        assert default_patch_sizes(224, 224) == (56, 28, 14, 7)

    def test_smallest_images_get_two_stages(self):
        assert default_patch_sizes(8, 8) == (2, 1)

    def test_tiny_or_indivisible_rejected(self):
        with pytest.raises(ConfigurationError):
            default_patch_sizes(4, 4)  # single-stage ladder
        with pytest.raises(ConfigurationError):
            default_patch_sizes(12, 20)  # 3 does not divide 20


class TestConfigFiles:
    def test_file_round_trip(self, tmp_path):
        config = preset("cf-2.10", seed=4)
        path = tmp_path / "c.json"
        save_config(config, path)
        loaded = load_config(str(path))
        assert loaded.to_dict() == config.to_dict()
        assert loaded.config_hash == config.config_hash

    def test_seed_override_on_load(self, tmp_path):
        path = tmp_path / "c.json"
        save_config(preset("cf-2.10", seed=4), path)
        assert load_config(str(path), seed=8).seed == 8

    def test_bad_json_is_config_error(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{nope")
        with pytest.raises(ConfigurationError):
            load_config(str(path))

    def test_name_falls_back_to_preset(self):
        assert load_config("cf-2.10").preset_id == "cf-2.10"