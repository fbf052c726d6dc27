"""Tests for JSON system descriptions (system_config.py)."""

import json
import math

import pytest

from errors import ConfigError, ExpressionSyntaxError, NonRegressiveError
from system_config import load_config, parse_config


def _doc(**overrides):
    doc = {
        "name": "test system",
        "timescale": {"preset": "Z", "period": 2},
        "dimension": 2,
        "matrix": [["-1", "(2+(-1)^t)/2"], ["(2+(-1)^t)/2", "-1"]],
    }
    doc.update(overrides)
    return doc


# ── Valid documents ───────────────────────────────────────────────────────────


class TestParseValid:
    def test_minimal(self):
        cfg = parse_config(_doc())
        assert cfg.name == "test system"
        assert cfg.dimension == 2
        assert cfg.timescale.period == 2
        assert cfg.t0 == 0.0
        assert cfg.forcing is None

    def test_default_name(self):
        doc = _doc()
        del doc["name"]
        assert parse_config(doc).name == "system"

    def test_constant_expression_period(self):
        cfg = parse_config(_doc(timescale={"preset": "R", "period": "2*pi"}, matrix=[["0", "1"], ["-1", "0"]]))
        assert cfg.timescale.period == pytest.approx(2 * math.pi)

    def test_numeric_matrix_entries(self):
        cfg = parse_config(_doc(dimension=1, matrix=[[-0.5]]))
        assert cfg.build_system().matrix_at(cfg.timescale.locate(0))[0, 0] == pytest.approx(-0.5)

    def test_runs(self):
        cfg = parse_config(
            _doc(
                timescale={"runs": [{"kind": "continuous", "length": 1, "gap": 1}]},
                dimension=1,
                matrix=[["-1"]],
            )
        )
        ts = cfg.timescale
        assert ts.period == 2
        assert ts.contains(2.5)
        assert not ts.contains(1.5)

    def test_anchor_is_default_t0(self):
        cfg = parse_config(_doc(timescale={"preset": "Z", "period": 2, "anchor": 1}))
        assert cfg.t0 == 1.0

    def test_explicit_t0(self):
        assert parse_config(_doc(t0=3)).t0 == 3.0

    def test_forcing(self):
        cfg = parse_config(_doc(forcing=["1", 0]))
        assert len(cfg.forcing) == 2

    def test_options_override_environment(self, monkeypatch):
        monkeypatch.setenv("FLOQUET_RK_TOL", "1e-8")
        monkeypatch.setenv("FLOQUET_H_MAX", "0.5")
        cfg = parse_config(_doc(options={"h_max": 1e-3, "pb_terms": 20}))
        assert cfg.options.h_max == 1e-3
        assert cfg.options.pb_terms == 20
        assert cfg.options.rk_tol == 1e-8

    def test_build_system(self, config_path):
        cfg = load_config(config_path("discrete_example.json"))
        system = cfg.build_system()
        assert system.n == 2
        assert system.name == cfg.name


# ── Schema violations ─────────────────────────────────────────────────────────


class TestParseInvalid:
    @pytest.mark.parametrize(
        "overrides, message",
        [
            ({"extra": 1}, "Unknown key"),
            ({"timescale": {"preset": "Z", "step": 1}}, "Unknown key"),
            ({"timescale": {"preset": "Z"}, "options": {"tolerance": 1}}, "Unknown key"),
            ({"dimension": 0}, "dimension"),
            ({"dimension": True}, "dimension"),
            ({"dimension": "2"}, "dimension"),
            ({"matrix": [["1", "0"]]}, "matrix"),
            ({"matrix": [["1", "0"], ["0"]]}, "matrix"),
            ({"forcing": ["1"]}, "forcing"),
            ({"t0": 0.5}, "not in the time scale"),
            ({"options": {"pb_terms": 2.5}}, "pb_terms"),
            ({"options": {"h_max": True}}, "boolean"),
            ({"options": {"h_max": -1}}, "positive"),
            ({"name": 3}, "name"),
        ],
    )
    def test_rejected(self, overrides, message):
        with pytest.raises(ConfigError, match=message):
            parse_config(_doc(**overrides))

    @pytest.mark.parametrize("key", ["timescale", "dimension", "matrix"])
    def test_missing_required(self, key):
        doc = _doc()
        del doc[key]
        with pytest.raises(ConfigError, match=f"Missing required key '{key}'"):
            parse_config(doc)

    @pytest.mark.parametrize(
        "timescale",
        [
            {"period": 2},
            {"preset": "Z", "runs": [{"kind": "point", "gap": 1}]},
        ],
    )
    def test_exactly_one_of_preset_or_runs(self, timescale):
        with pytest.raises(ConfigError, match="exactly one"):
            parse_config(_doc(timescale=timescale))

    def test_h_rejected_with_runs(self):
        with pytest.raises(ConfigError, match="hZ"):
            parse_config(_doc(timescale={"runs": [{"kind": "point", "gap": 1}], "h": 1}))

    def test_bad_run_kind(self):
        with pytest.raises(ConfigError, match="kind"):
            parse_config(_doc(timescale={"runs": [{"kind": "interval", "length": 1}]}))

    def test_unknown_preset(self):
        with pytest.raises(ConfigError, match="preset"):
            parse_config(_doc(timescale={"preset": "Q"}))

    def test_matrix_syntax_error(self):
        with pytest.raises(ExpressionSyntaxError):
            parse_config(_doc(matrix=[["1+", "0"], ["0", "1"]]))

    def test_non_constant_number(self):
        with pytest.raises(ConfigError, match="period"):
            parse_config(_doc(timescale={"preset": "R", "period": "t"}))

    def test_non_periodic_matrix(self):
        cfg = parse_config(_doc(dimension=1, matrix=[["t"]], timescale={"preset": "Z"}))
        with pytest.raises(ConfigError, match="periodic"):
            cfg.build_system()

    def test_non_regressive_matrix(self):
        cfg = parse_config(_doc(dimension=1, matrix=[["-1"]], timescale={"preset": "Z"}))
        with pytest.raises(NonRegressiveError):
            cfg.build_system()
        assert cfg.build_system(check=False).n == 1


# ── Loading from disk ─────────────────────────────────────────────────────────


class TestLoadConfig:
    def test_load(self, tmp_path):
        path = tmp_path / "system.json"
        path.write_text(json.dumps(_doc()))
        assert load_config(path).name == "test system"

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError, match="invalid JSON"):
            load_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_config(tmp_path / "absent.json")

    @pytest.mark.parametrize(
        "name",
        [
            "discrete_example.json",
            "continuous_example.json",
            "hybrid_example.json",
            "jordan_example.json",
            "unstable_example.json",
            "forced_scalar.json",
        ],
    )
    def test_examples_load(self, config_path, name):
        cfg = load_config(config_path(name))
        assert cfg.build_system().n == cfg.dimension
