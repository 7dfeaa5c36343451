import copy
import csv
import io
import json
import math
import pathlib
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from warpedg2.config import (
    build_flow_params,
    build_profile,
    build_step_control,
    eval_preset,
    load_config,
    parse_config,
    parse_sweep,
)
from warpedg2.errors import ConfigError
from warpedg2.geometry import compute_abc
from warpedg2.io import (
    TORSION_COLUMNS,
    csv_text,
    fmt,
    json_line,
    json_text,
    phase_rows,
    phase_svg,
    torsion_rows,
)

CONFIGS = pathlib.Path(__file__).resolve().parents[1] / "configs"

BASE = {
    "profile": {
        "lambda": 1.0,
        "grid": {"n": 16, "r_min": 0.0, "r_max": 2 * math.pi, "topology": "circle"},
        "G": {"expr": "constant", "params": {"value": 1.0}},
        "h": {"expr": "constant", "params": {"value": 2.0}},
        "theta": {"expr": "linear", "params": {"a": 0.0, "b": 1.0}},
    }
}


def with_change(path, value):
    data = copy.deepcopy(BASE)
    node = data
    for key in path[:-1]:
        node = node[key]
    if value is None:
        del node[path[-1]]
    else:
        node[path[-1]] = value
    return json.dumps(data)


class TestParse:
    @pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.json")), ids=lambda p: p.name)
    def test_shipped_configs_validate(self, path):
        if path.name == "sweep.json":
            assert len(parse_sweep(path.read_text())["runs"]) >= 2
        else:
            load_config(str(path))

    def test_malformed_json_location(self):
        with pytest.raises(ConfigError, match="line 2, column 1"):
            parse_config('{"profile":\n}')

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(str(tmp_path / "nope.json"))

    @pytest.mark.parametrize(
        "path, value, where",
        [
            (("profile", "lambda"), None, "lambda"),
            (("profile", "grid", "n"), 4, "profile/grid/n"),
            (("profile", "grid", "topology"), "torus", "profile/grid/topology"),
            (("profile", "G"), {"expr": "spline"}, "profile/G"),
            (("profile", "extra"), 1, "extra"),
        ],
    )
    def test_schema_errors_name_the_field(self, path, value, where):
        with pytest.raises(ConfigError, match=where):
            parse_config(with_change(path, value))

    def test_unknown_top_level(self):
        with pytest.raises(ConfigError):
            parse_config('{"service": {}}')

    def test_preset_params_checked(self):
        bad = with_change(("profile", "G"), {"expr": "sin", "params": {"amp": 1.0}})
        with pytest.raises(ConfigError, match="unknown parameters"):
            parse_config(bad)

    def test_sample_count_checked(self):
        bad = with_change(("profile", "h"), {"samples": [1.0] * 12})
        with pytest.raises(ConfigError, match="12 samples"):
            parse_config(bad)

    def test_interval_order_checked(self):
        bad = with_change(("profile", "grid"), {"n": 16, "r_min": 1.0, "r_max": 1.0, "topology": "interval"})
        with pytest.raises(ConfigError, match="r_max"):
            parse_config(bad)

    def test_sweep_names_unique(self):
        run = {"name": "a", "command": "torsion", "config": BASE}
        with pytest.raises(ConfigError, match="unique"):
            parse_sweep(json.dumps({"runs": [run, run]}))

    def test_step_control(self):
        ctl = build_step_control({"step_control": {"rtol": 1e-6}})
        assert ctl.rtol == 1e-6 and ctl.atol == 1e-12
        with pytest.raises(ConfigError):
            build_step_control({"step_control": {"dt_init": 1e-9, "dt_min": 1e-3}})

    def test_flow_params_defaults(self):
        p = build_flow_params({"flow": {"t_end": 1.0}})
        assert (p.k, p.C) == (2.0, 0.0)


class TestPresets:
    r = np.linspace(0, 1, 5)

    @pytest.mark.parametrize(
        "name, params, fn",
        [
            ("constant", {"value": 2.5}, lambda r: 2.5 + 0 * r),
            ("linear", {"a": 1.0, "b": -2.0}, lambda r: 1 - 2 * r),
            ("sin", {"amplitude": 0.5, "frequency": 2.0, "phase": 0.1, "offset": 1.0}, lambda r: 1 + 0.5 * np.sin(2 * r + 0.1)),
            ("cos", {}, np.cos),
            ("exp", {"rate": -1.0, "offset": 1.0}, lambda r: 1 + np.exp(-r)),
        ],
    )
    def test_values(self, name, params, fn):
        assert np.array_equal(eval_preset(name, params, self.r), fn(self.r))

    def test_unknown(self):
        with pytest.raises(ConfigError):
            eval_preset("spline", {}, self.r)


class TestBuildProfile:
    def test_winding_from_preset(self):
        p = build_profile(json.loads(with_change(("profile", "lambda"), 1.0))["profile"])
        assert p.theta_winding == pytest.approx(2 * math.pi)
        t = compute_abc(p)
        assert np.allclose(t.alpha, 1) and np.allclose(t.beta, 0.5 * np.sin(p.r))

    def test_winding_from_samples(self):
        n = 16
        r = np.arange(n) * 2 * math.pi / n
        data = json.loads(with_change(("profile", "theta"), {"samples": list(2 * r)}))["profile"]
        assert build_profile(data).theta_winding == pytest.approx(4 * math.pi)

    def test_explicit_winding_wins(self):
        data = json.loads(with_change(("profile", "theta_winding"), 0.0))["profile"]
        data["theta"] = {"expr": "constant", "params": {"value": 0.3}}
        assert build_profile(data).theta_winding == 0.0

    def test_interval_has_no_winding(self):
        data = json.loads(with_change(("profile", "grid"), {"n": 16, "r_min": 0.0, "r_max": 1.0, "topology": "interval"}))
        assert build_profile(data["profile"]).theta_winding == 0.0

    def test_invalid_field_reported(self):
        data = json.loads(with_change(("profile", "G"), {"expr": "constant", "params": {"value": 0.0}}))["profile"]
        with pytest.raises(ConfigError, match="profile"):
            build_profile(data)


class TestCsv:
    def test_header_and_digits(self):
        text = csv_text(["a", "b"], [[1 / 3, 2.0]])
        lines = text.splitlines()
        assert lines[0] == "a,b" and lines[1] == "0.33333333333333331,2"

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=6))
    def test_round_trip(self, xs):
        rows = list(csv.reader(io.StringIO(csv_text([f"c{i}" for i in range(len(xs))], [xs]))))
        assert [float(v) for v in rows[1]] == xs

    def test_fmt_accepts_numpy(self):
        assert fmt(np.float64(0.1)) == "0.10000000000000001"

    def test_torsion_rows_shape(self):
        p = build_profile(BASE["profile"])
        rows = torsion_rows(p)
        assert len(rows) == 16 and len(rows[0]) == len(TORSION_COLUMNS)
        assert rows[0][TORSION_COLUMNS.index("traceT")] == pytest.approx(rows[0][4] - 6 * rows[0][5])


class TestJson:
    def test_numpy_and_nonfinite(self):
        out = json.loads(json_text({"a": np.arange(3), "b": np.float64(np.inf), "c": np.bool_(True)}))
        assert out == {"a": [0, 1, 2], "b": "inf", "c": True}

    def test_line_is_compact_and_sorted(self):
        assert json_line({"b": 1, "a": [1.5]}) == '{"a":[1.5],"b":1}'


class TestSvg:
    def test_well_formed(self):
        r = np.linspace(0, 6, 50)
        text = phase_svg([("one", np.cos(r), np.sin(r)), ("two", 2 + 0 * r, r)], title="demo")
        root = ET.fromstring(text)
        assert root.tag.endswith("svg")
        assert len(root.findall("{http://www.w3.org/2000/svg}polyline")) == 2
        assert "alpha" in text

    def test_degenerate_curve(self):
        ET.fromstring(phase_svg([("point", np.ones(3), np.zeros(3))]))

    def test_phase_rows(self):
        rows = phase_rows([0.0], [3.0], [4.0], [0.0], 0.0)
        assert rows == [[0.0, 3.0, 4.0, 0.0, 25.0]]
