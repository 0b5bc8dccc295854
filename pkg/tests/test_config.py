import json

from pillarguard.config import (
    RunConfig,
    config_from_dict,
    config_to_dict,
    load_config,
    save_config,
)


class TestPaperDefaults:
    def test_published_operating_point(self):
        cfg = RunConfig()
        assert cfg.train.m_pc == 1024
        assert cfg.t_iou == 1e-6
        assert cfg.train.alpha_fl == 1.0
        assert cfg.train.gamma_fl == 2.0
        assert cfg.defense.beta == 1e-3
        assert cfg.defense.boundary == 0.5
        assert cfg.metrics.c_conf == 0.5
        assert cfg.metrics.c_iou == 0.5
        assert cfg.max_neg_ratio == 1.5

    def test_grid_defaults(self):
        cfg = RunConfig()
        assert (cfg.grid.x_min, cfg.grid.x_max) == (0.0, 70.4)
        assert (cfg.grid.y_min, cfg.grid.y_max) == (-40.0, 40.0)
        assert cfg.grid.cell == 1.0


class TestSerialization:
    def test_roundtrip(self):
        cfg = RunConfig()
        assert config_from_dict(config_to_dict(cfg)) == cfg

    def test_file_roundtrip(self, tmp_path):
        cfg = RunConfig(seed=7)
        path = tmp_path / "config.json"
        save_config(cfg, path)
        assert load_config(path) == cfg

    def test_partial_override(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"seed": 3, "defense": {"boundary": 0.6}}))
        cfg = load_config(path)
        assert cfg.seed == 3
        assert cfg.defense.boundary == 0.6
        assert cfg.defense.beta == 1e-3  # untouched default
