import json
import struct

import numpy as np
import pytest

from rswshock import io as rio
from rswshock.grid import GridSpec
from rswshock.rswsolver import SERIES_COLUMNS, FluidState


def _state(t=0.1234567890123456789):
    g = GridSpec(24, 8, 0.5, 1.7, 1.0)
    rng = np.random.default_rng(11)
    return FluidState(t, g, 1 + 0.1 * rng.random(g.shape), rng.standard_normal(g.shape),
                      rng.standard_normal(g.shape), mass_offset=3e-7)


def test_snapshot_round_trip_is_bit_identical(tmp_path):
    s = _state(1 / 3)
    rio.save_snapshot(s, tmp_path / "a.rsw")
    r = rio.load_snapshot(tmp_path / "a.rsw")
    assert r.t == s.t and r.mass_offset == s.mass_offset
    assert r.grid == s.grid
    for f in ("h", "v1", "v2"):
        assert getattr(r, f).tobytes() == getattr(s, f).tobytes()
    rio.save_snapshot(r, tmp_path / "b.rsw")
    assert (tmp_path / "a.rsw").read_bytes() == (tmp_path / "b.rsw").read_bytes()


def test_snapshot_layout(tmp_path):
    s = _state()
    rio.save_snapshot(s, tmp_path / "a.rsw")
    raw = (tmp_path / "a.rsw").read_bytes()
    assert raw[:8] == rio.MAGIC
    (hl,) = struct.unpack("<I", raw[8:12])
    head = json.loads(raw[12:12 + hl])
    assert head["n1"] == 24 and head["layout"] == "row-major-x2-fastest"
    first = np.frombuffer(raw[12 + hl:12 + hl + 16], dtype="<f8")
    np.testing.assert_array_equal(first, s.h[0, :2])


def test_truncated_payload(tmp_path):
    rio.save_snapshot(_state(), tmp_path / "a.rsw")
    raw = (tmp_path / "a.rsw").read_bytes()
    (tmp_path / "t.rsw").write_bytes(raw[:-8])
    with pytest.raises(rio.FormatError):
        rio.load_snapshot(tmp_path / "t.rsw")
    (tmp_path / "h.rsw").write_bytes(raw[:20])
    with pytest.raises(rio.FormatError):
        rio.load_snapshot(tmp_path / "h.rsw")


def test_bad_magic(tmp_path):
    (tmp_path / "x.rsw").write_bytes(b"NOTASNAP" + bytes(32))
    with pytest.raises(rio.FormatError):
        rio.load_snapshot(tmp_path / "x.rsw")


def _write_with_header(path, header, payload=b""):
    hb = json.dumps(header).encode()
    path.write_bytes(rio.MAGIC + struct.pack("<I", len(hb)) + hb + payload)


@pytest.mark.parametrize("mutate", [
    lambda h: h.pop("t"),
    lambda h: h.update(n1="24"),
    lambda h: h.update(dtype="f32le"),
    lambda h: h.update(fields=["h", "v1"]),
    lambda h: h.update(n1=7),
])
def test_schema_errors(tmp_path, mutate):
    header = {"n1": 24, "n2": 8, "x1_min": 0.5, "x1_max": 1.7, "x2_period": 1.0, "t": 0.0,
              "fields": ["h", "v1", "v2"], "dtype": "f64le", "layout": "row-major-x2-fastest"}
    mutate(header)
    _write_with_header(tmp_path / "s.rsw", header, bytes(3 * 24 * 8 * 8))
    with pytest.raises(rio.SchemaError):
        rio.load_snapshot(tmp_path / "s.rsw")


def test_header_not_json(tmp_path):
    (tmp_path / "j.rsw").write_bytes(rio.MAGIC + struct.pack("<I", 4) + b"{{{{")
    with pytest.raises(rio.SchemaError):
        rio.load_snapshot(tmp_path / "j.rsw")


def test_list_snapshots_sorted(tmp_path):
    for k in (20, 3, 100):
        rio.save_snapshot(_state(), rio.snapshot_path(tmp_path, k))
    names = [p.name for p in rio.list_snapshots(tmp_path)]
    assert names == ["snap_00000003.rsw", "snap_00000020.rsw", "snap_00000100.rsw"]
    assert rio.list_snapshots(tmp_path / "nope") == []


# ----------------------------------------------------------------- series

def test_series_round_trip_full_precision(tmp_path):
    rng = np.random.default_rng(2)
    rows = rng.standard_normal((5, len(SERIES_COLUMNS))) * 10.0 ** rng.integers(-20, 20, (5, 1))
    rows[0, 2] = np.nan
    rio.write_series(rows, tmp_path / "s.csv")
    S = rio.read_series(tmp_path / "s.csv")
    assert tuple(S) == SERIES_COLUMNS
    for k, c in enumerate(SERIES_COLUMNS):
        np.testing.assert_array_equal(S[c], rows[:, k])


def test_series_rows_use_17_digits(tmp_path):
    rio.write_series([[0.1] * len(SERIES_COLUMNS)], tmp_path / "s.csv")
    line = (tmp_path / "s.csv").read_text().splitlines()[1]
    assert line.split(",")[0] == "0.10000000000000001"


def test_empty_series_is_header_only(tmp_path):
    rio.write_series([], tmp_path / "e.csv")
    assert (tmp_path / "e.csv").read_text() == ",".join(SERIES_COLUMNS) + "\n"
    S = rio.read_series(tmp_path / "e.csv")
    assert all(v.size == 0 for v in S.values())


def test_append_series(tmp_path):
    p = tmp_path / "a.csv"
    cols = ("t", "x")
    rio.append_series(None, p, cols)
    rio.append_series([0.5, 1.0], p, cols)
    rio.append_series({"t": 1.0, "x": 2.0}, p, cols)
    S = rio.read_series(p)
    assert S["t"].tolist() == [0.5, 1.0] and S["x"].tolist() == [1.0, 2.0]


def test_series_writer_checks_row_length(tmp_path):
    with rio.SeriesWriter(tmp_path / "w.csv", ("a", "b")) as w:
        with pytest.raises(ValueError):
            w.append([1.0])


def test_read_missing_series(tmp_path):
    with pytest.raises(rio.IoError):
        rio.read_series(tmp_path / "none.csv")


# ------------------------------------------------------------------- json

def test_json_cleaning_and_hash(tmp_path):
    obj = {"a": np.float64(1.5), "b": np.arange(3), "c": np.nan, "d": np.inf, "e": np.bool_(True)}
    rio.write_json(obj, tmp_path / "o.json")
    back = json.loads((tmp_path / "o.json").read_text())
    assert back == {"a": 1.5, "b": [0, 1, 2], "c": None, "d": "inf", "e": True}
    assert rio.content_hash({"x": 1, "y": 2}) == rio.content_hash({"y": 2, "x": 1})
    assert rio.content_hash({"x": 1}) != rio.content_hash({"x": 2})


# ----------------------------------------------------------------- config

def test_config_defaults():
    cfg = rio.resolve_config({"pulse": {}})
    assert cfg["source"] == "pulse" and "selfsimilar" not in cfg
    assert cfg["grid"]["n1"] == 2048 and cfg["grid"]["n2"] == 64
    assert cfg["pulse"]["delta"] == 0.05 and cfg["solver"]["scheme"] == "central4"
    assert cfg["solver"]["window"] == "comoving"


def test_config_integers_promote_to_float():
    cfg = rio.resolve_config({"pulse": {"delta": 0.05}, "solver": {"stop_ratio": 50}})
    assert isinstance(cfg["solver"]["stop_ratio"], float)


@pytest.mark.parametrize("doc", [
    {"pulse": {}, "extra": {}},
    {"pulse": {"deltaa": 0.1}},
    {"pulse": {"delta": "0.1"}},
    {"pulse": {}, "selfsimilar": {}},
    {"pulse": {"preset": "wild"}},
    {"pulse": {}, "solver": {"scheme": "upwind"}},
    {"pulse": {}, "solver": {"rotation": 1}},
    {"pulse": {}, "rays": {"closure": "none"}},
    {"selfsimilar": {"n": 0}},
    {"pulse": {}, "grid": {"n1": 4}},
    [],
])
def test_config_rejections(doc):
    with pytest.raises(rio.ConfigError):
        rio.resolve_config(doc)


def test_load_config_errors(tmp_path):
    with pytest.raises(rio.ConfigError):
        rio.load_config(tmp_path / "absent.json")
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(rio.ConfigError):
        rio.load_config(tmp_path / "bad.json")


def test_presets():
    zero = rio.build_pulse_spec(rio.resolve_config({"pulse": {"preset": "zero"}}))
    assert zero.f1.is_zero and zero.f2.is_zero and zero.phi2.is_zero
    std = rio.build_pulse_spec(rio.resolve_config({"pulse": {}}))
    assert not std.f1.is_zero


def test_echo_profiles_round_trip():
    cfg = rio.resolve_config({"pulse": {}})
    echo = rio.echo_profiles(cfg)
    again = rio.resolve_config({"pulse": echo["pulse"]})
    a, b = rio.build_pulse_spec(cfg), rio.build_pulse_spec(again)
    assert a.f1.to_dict() == b.f1.to_dict() and a.phi2.to_dict() == b.phi2.to_dict()


def test_out_root(monkeypatch, tmp_path):
    monkeypatch.delenv("RSW_OUT_DIR", raising=False)
    assert str(rio.out_root("run")) == "run"
    monkeypatch.setenv("RSW_OUT_DIR", str(tmp_path))
    assert rio.out_root("run") == tmp_path / "run"
    assert rio.out_root("/abs/run") == rio.Path("/abs/run")


# ------------------------------------------------------------------ plots

def test_plots_idempotent_and_reference_present_files(tmp_path):
    rio.write_series([[0.0] * len(SERIES_COLUMNS)], tmp_path / "series.csv")
    rio.write_json({"generation": {"kind": "pulse", "ds_phi1_max": 2.0, "delta": 0.05, "iota": 0.0}},
                   tmp_path / "manifest.json")
    first = {p.name: p.read_text() for p in rio.emit_plots(tmp_path)}
    second = {p.name: p.read_text() for p in rio.emit_plots(tmp_path)}
    assert first == second
    assert set(first) == {"plot_mu.gp", "plot_gradients.gp", "plot_holder.gp"}
    assert "holder.csv" not in first["plot_holder.gp"]
    assert "k = 2.0" in first["plot_mu.gp"] and "1 - 1.5*k*x" in first["plot_mu.gp"]
    rio.write_series([[0.0] * 5], tmp_path / "holder.csv", ("t", "a", "b", "c", "d"))
    assert "holder.csv" in rio.emit_plots(tmp_path)[2].read_text()


def test_plots_need_series(tmp_path):
    with pytest.raises(rio.IoError):
        rio.emit_plots(tmp_path)
