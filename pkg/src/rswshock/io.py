"""Configuration, snapshots, series and reports.

Snapshot layout (little-endian):

    b"RSWSNAP1" | u32 header length | JSON header | h, v1, v2 as f64le, x2 fastest
"""
from __future__ import annotations

import copy
import csv
import hashlib
import json
import math
import os
import struct
from pathlib import Path

import numpy as np

from .grid import GridSpec
from .rswsolver import SERIES_COLUMNS, FluidState

MAGIC = b"RSWSNAP1"
FIELDS = ("h", "v1", "v2")


class FormatError(ValueError):
    pass


class SchemaError(ValueError):
    pass


class ConfigError(ValueError):
    pass


class IoError(OSError):
    pass


# ------------------------------------------------------------------ paths

def out_root(path) -> Path:
    """Relative paths are resolved under $RSW_OUT_DIR when it is set."""
    p = Path(path)
    root = os.environ.get("RSW_OUT_DIR")
    if root and not p.is_absolute():
        return Path(root) / p
    return p


def snapshot_path(out_dir, step: int) -> Path:
    d = Path(out_dir) / "snapshots"
    d.mkdir(parents=True, exist_ok=True)
    return d / f"snap_{step:08d}.rsw"


def list_snapshots(run_dir) -> list[Path]:
    d = Path(run_dir) / "snapshots"
    return sorted(d.glob("snap_*.rsw")) if d.is_dir() else []


# -------------------------------------------------------------- snapshots

def save_snapshot(state: FluidState, path) -> None:
    g = state.grid
    header = {"n1": g.n1, "n2": g.n2, "x1_min": g.x1_min, "x1_max": g.x1_max,
              "x2_period": g.x2_period, "t": state.t, "fields": list(FIELDS), "dtype": "f64le",
              "layout": "row-major-x2-fastest", "mass_offset": state.mass_offset}
    hb = json.dumps(header, sort_keys=True).encode("utf-8")
    payload = b"".join(np.ascontiguousarray(getattr(state, f), dtype="<f8").tobytes() for f in FIELDS)
    try:
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<I", len(hb)))
            fh.write(hb)
            fh.write(payload)
    except OSError as e:
        raise IoError(str(e)) from e


_HEADER_KEYS = {"n1": int, "n2": int, "x1_min": float, "x1_max": float, "x2_period": float,
                "t": float, "fields": list, "dtype": str, "layout": str}


def load_snapshot(path) -> FluidState:
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        raise IoError(str(e)) from e
    if len(raw) < 12 or raw[:8] != MAGIC:
        raise FormatError("bad magic")
    (hl,) = struct.unpack("<I", raw[8:12])
    if 12 + hl > len(raw):
        raise FormatError("truncated header")
    try:
        header = json.loads(raw[12:12 + hl].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise SchemaError(f"header is not JSON: {e}") from e
    for k, typ in _HEADER_KEYS.items():
        if k not in header:
            raise SchemaError(f"header missing {k}")
        if typ is float and isinstance(header[k], int):
            header[k] = float(header[k])
        if not isinstance(header[k], typ) or isinstance(header[k], bool):
            raise SchemaError(f"header field {k} has wrong type")
    if header["fields"] != list(FIELDS) or header["dtype"] != "f64le" or \
            header["layout"] != "row-major-x2-fastest":
        raise SchemaError("unsupported field list, dtype or layout")
    try:
        grid = GridSpec(header["n1"], header["n2"], header["x1_min"], header["x1_max"], header["x2_period"])
    except ValueError as e:
        raise SchemaError(str(e)) from e
    n = grid.n1 * grid.n2
    payload = raw[12 + hl:]
    if len(payload) != 3 * n * 8:
        raise FormatError(f"payload is {len(payload)} bytes, expected {3 * n * 8}")
    arr = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(3, grid.n1, grid.n2)
    return FluidState(header["t"], grid, arr[0].copy(), arr[1].copy(), arr[2].copy(),
                      float(header.get("mass_offset", 0.0)))


# ----------------------------------------------------------------- series

class SeriesWriter:
    """Streams rows to a CSV, header first, flushing every row."""

    def __init__(self, path, columns=SERIES_COLUMNS):
        self.path = Path(path)
        self.columns = tuple(columns)
        try:
            self._fh = open(self.path, "w", newline="")
        except OSError as e:
            raise IoError(str(e)) from e
        self._fh.write(",".join(self.columns) + "\n")
        self._fh.flush()

    def append(self, row):
        if len(row) != len(self.columns):
            raise ValueError("row length does not match the column count")
        self._fh.write(",".join(f"{float(x):.17g}" for x in row) + "\n")

    def close(self):
        if not self._fh.closed:
            self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def append_series(row, csv_path, columns=SERIES_COLUMNS) -> None:
    """Append one row; writes the header when the file is new or empty."""
    p = Path(csv_path)
    if isinstance(row, dict):
        row = [row[c] for c in columns]
    try:
        new = not p.exists() or p.stat().st_size == 0
        with open(p, "a", newline="") as fh:
            if new:
                fh.write(",".join(columns) + "\n")
            if row is not None:
                fh.write(",".join(f"{float(x):.17g}" for x in row) + "\n")
    except OSError as e:
        raise IoError(str(e)) from e


def write_series(rows, csv_path, columns=SERIES_COLUMNS) -> None:
    with SeriesWriter(csv_path, columns) as w:
        for r in rows:
            w.append(r)


def read_series(csv_path) -> dict:
    p = Path(csv_path)
    try:
        with open(p, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = [[float(x) for x in r] for r in reader if r]
    except (OSError, StopIteration) as e:
        raise IoError(f"cannot read series {p}: {e}") from e
    arr = np.array(rows, dtype=float).reshape(-1, len(header))
    return {c: arr[:, k] for k, c in enumerate(header)}


# ------------------------------------------------------------------- json

def _clean(o):
    if isinstance(o, dict):
        return {str(k): _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    if isinstance(o, (np.floating, float)):
        x = float(o)
        return x if math.isfinite(x) else (None if math.isnan(x) else ("inf" if x > 0 else "-inf"))
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return _clean(o.tolist())
    return o


def write_json(obj, path) -> None:
    try:
        Path(path).write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")
    except OSError as e:
        raise IoError(str(e)) from e


def content_hash(obj) -> str:
    return hashlib.sha256(json.dumps(_clean(obj), sort_keys=True).encode()).hexdigest()


# ----------------------------------------------------------------- config

DEFAULTS = {
    "grid": {"n1": 2048, "n2": 64, "x1_min": None, "x1_max": None, "x2_period": 1.0, "length": 0.2},
    "pulse": {"delta": 0.05, "iota": 0.0, "preset": "standard", "f1": None, "f2": None, "phi2": None,
              "normalize_target": 1.0, "n_s": 1025, "n_theta": 128},
    "selfsimilar": {"delta": 0.05, "n": 1, "ramp_fraction": 0.25},
    "solver": {"scheme": "central4", "cfl": 0.4, "hyperviscosity": 0.005, "t_end": None,
               "stop_gradient": None, "stop_ratio": 30.0, "stop_on_saturation": True,
               "snapshot_every": 0, "rotation": True, "window": "comoving", "window_lead": 0.05,
               "dt_floor": 1e-9, "hybrid_switch": 10.0, "threads": 1, "progress_every": 0,
               "max_steps": None},
    "rays": {"enabled": True, "n_u": 64, "n_theta": 16, "closure": "h", "mu_stop": 0.05,
             "record_every": 0},
    "diagnostics": {"particles": True, "particle_n1": 96, "particle_n2": 8, "particle_x1": None,
                    "zeta": True, "region_margin": 0.1, "holder_max_sep": None,
                    "fit_ratio_lo": 2.0, "fit_ratio_hi": 10.0, "rate_ratio_lo": 1.0},
    "output": {"dir": "run"},
}

_TYPES = {
    "grid": {"n1": int, "n2": int, "x1_min": (float, type(None)), "x1_max": (float, type(None)),
             "x2_period": float, "length": float},
    "pulse": {"delta": float, "iota": float, "preset": str, "f1": (dict, type(None)),
              "f2": (dict, type(None)), "phi2": (dict, type(None)),
              "normalize_target": (float, type(None)), "n_s": int, "n_theta": int},
    "selfsimilar": {"delta": float, "n": int, "ramp_fraction": float},
    "solver": {"scheme": str, "cfl": float, "hyperviscosity": float, "t_end": (float, type(None)),
               "stop_gradient": (float, type(None)), "stop_ratio": float, "stop_on_saturation": bool,
               "snapshot_every": int, "rotation": bool, "window": str, "window_lead": float,
               "dt_floor": float, "hybrid_switch": float, "threads": int, "progress_every": int,
               "max_steps": (int, type(None))},
    "rays": {"enabled": bool, "n_u": int, "n_theta": int, "closure": str, "mu_stop": float,
             "record_every": int},
    "diagnostics": {"particles": bool, "particle_n1": int, "particle_n2": int,
                    "particle_x1": (list, type(None)), "zeta": bool, "region_margin": float,
                    "holder_max_sep": (float, type(None)), "fit_ratio_lo": float,
                    "fit_ratio_hi": float, "rate_ratio_lo": float},
    "output": {"dir": str},
}

PRESETS = ("standard", "zero")


def _check_type(section, key, value, typ):
    types = typ if isinstance(typ, tuple) else (typ,)
    if isinstance(value, bool) and bool not in types:
        raise ConfigError(f"{section}.{key}: expected {typ}, got bool")
    if float in types and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if not isinstance(value, types):
        raise ConfigError(f"{section}.{key}: expected {typ}, got {type(value).__name__}")
    return value


def resolve_config(doc: dict) -> dict:
    """Validate a config document and fill every default.  Raises ConfigError."""
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(doc) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown sections: {sorted(unknown)}")
    if "pulse" in doc and "selfsimilar" in doc:
        raise ConfigError("give either a pulse or a selfsimilar section, not both")
    out = {}
    for sec, defaults in DEFAULTS.items():
        given = doc.get(sec, {})
        if given is None:
            given = {}
        if not isinstance(given, dict):
            raise ConfigError(f"section {sec} must be an object")
        bad = set(given) - set(defaults)
        if bad:
            raise ConfigError(f"unknown keys in {sec}: {sorted(bad)}")
        merged = copy.deepcopy(defaults)
        for k, v in given.items():
            merged[k] = _check_type(sec, k, v, _TYPES[sec][k])
        out[sec] = merged
    out["source"] = "selfsimilar" if "selfsimilar" in doc else ("pulse" if "pulse" in doc else None)
    if out["source"] != "selfsimilar":
        del out["selfsimilar"]
    if out["source"] != "pulse" and out["source"] is not None:
        del out["pulse"]
    if "pulse" in out and out["pulse"]["preset"] not in PRESETS:
        raise ConfigError(f"pulse.preset must be one of {PRESETS}")
    _validate_objects(out)
    return out


def _validate_objects(cfg):
    try:
        build_solver_config(cfg, t_end=1.0)
        if "pulse" in cfg:
            build_pulse_spec(cfg)
        if "selfsimilar" in cfg:
            ss = cfg["selfsimilar"]
            if ss["n"] < 1 or not 0 < ss["delta"] <= 0.2:
                raise ValueError("selfsimilar needs n >= 1 and 0 < delta <= 0.2")
        if cfg["rays"]["closure"] not in ("h", "v", "eikonal"):
            raise ValueError("rays.closure must be h, v or eikonal")
        g = cfg["grid"]
        if g["n1"] < 8 or g["n2"] < 4:
            raise ValueError("grid too small")
    except (ValueError, KeyError, TypeError) as e:
        raise ConfigError(str(e)) from e


def load_config(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from e
    return resolve_config(doc)


def build_pulse_spec(cfg):
    from .profiles import Profile, profile_from_dict
    from .pulsegen import PulseSpec, standard_pulse
    p = cfg["pulse"]
    base = standard_pulse(p["delta"], p["iota"], p["normalize_target"], cfg["grid"]["x2_period"]) \
        if p["preset"] == "standard" else PulseSpec(p["delta"], p["iota"], period=cfg["grid"]["x2_period"],
                                                    normalize_target=p["normalize_target"])
    f1 = profile_from_dict(p["f1"]) if p["f1"] is not None else base.f1
    f2 = profile_from_dict(p["f2"]) if p["f2"] is not None else base.f2
    phi2 = profile_from_dict(p["phi2"]) if p["phi2"] is not None else base.phi2
    if p["preset"] == "zero" and p["normalize_target"] is not None and \
            all(x.is_zero for x in (f1, f2, phi2)):
        # nothing to normalise for zero data
        norm = None
    else:
        norm = p["normalize_target"]
    return PulseSpec(p["delta"], p["iota"], f1, f2, phi2, norm, cfg["grid"]["x2_period"])


def build_solver_config(cfg, t_end: float):
    from .rswsolver import SolverConfig
    s = dict(cfg["solver"])
    s["t_end"] = s["t_end"] if s["t_end"] is not None else t_end
    return SolverConfig(**s)


def echo_profiles(cfg) -> dict:
    """Resolved config with the pulse profiles expanded (for manifests)."""
    out = copy.deepcopy(cfg)
    if "pulse" in cfg:
        spec = build_pulse_spec(cfg)
        out["pulse"]["f1"] = spec.f1.to_dict()
        out["pulse"]["f2"] = spec.f2.to_dict()
        out["pulse"]["phi2"] = spec.phi2.to_dict()
        out["pulse"]["normalize_target"] = spec.normalize_target
    return out


# ------------------------------------------------------------------ plots

def emit_plots(run_dir) -> list[Path]:
    """gnuplot scripts for the mu collapse, gradient growth and Hoelder tables."""
    d = Path(run_dir)
    if not (d / "series.csv").exists():
        raise IoError(f"{d / 'series.csv'} does not exist")
    k = 1.0
    amp = 1.0
    man = d / "manifest.json"
    if man.exists():
        m = json.loads(man.read_text())
        gen = m.get("generation", {})
        k = float(gen.get("ds_phi1_max", 1.0) or 1.0)
        amp = float(gen.get("delta", 1.0)) ** float(gen.get("iota", 0.0)) if gen.get("kind") == "pulse" else 1.0
    common = "set datafile separator ','\nset key autotitle columnhead\nset grid\n"
    scripts = {
        "plot_mu.gp": common + (
            "set xlabel 't'\nset ylabel 'mu_min'\n"
            f"k = {k * amp!r}\n"
            "plot 'series.csv' using 1:3 with lines title 'mu_min', "
            "1 - 1.5*k*x with lines dashtype 2 title '1 - 1.5 k t'\n"),
        "plot_gradients.gp": common + (
            "set xlabel 't'\nset logscale y\nset ylabel 'max gradient'\n"
            "plot 'series.csv' using 1:4 with lines title 'max|d1 v1|', "
            "'' using 1:5 with lines title 'max|d1 h|', "
            "'' using 1:6 with lines title 'max|d1 zeta|'\n"),
    }
    if (d / "holder.csv").exists():
        scripts["plot_holder.gp"] = common + (
            "set xlabel 't'\nset logscale y\nset ylabel 'quotient'\n"
            "plot 'holder.csv' using 1:2 with linespoints title 'xi, alpha=1', "
            "'' using 1:3 with linespoints title 'zeta, alpha=1', "
            "'' using 1:4 with linespoints title 'rho, alpha=1/(2n+1)', "
            "'' using 1:5 with linespoints title 'rho, alpha=1'\n")
    else:
        scripts["plot_holder.gp"] = common + (
            "set xlabel 't'\nset logscale y\nset ylabel 'Lipschitz proxies'\n"
            "plot 'series.csv' using 1:4 with lines title 'max|d1 v1|', "
            "'' using 1:6 with lines title 'max|d1 zeta|'\n")
    out = []
    for name, text in scripts.items():
        p = d / name
        try:
            p.write_text(text)
        except OSError as e:
            raise IoError(str(e)) from e
        out.append(p)
    return out
