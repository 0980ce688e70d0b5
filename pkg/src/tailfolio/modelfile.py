"""File formats: JSON model descriptions and CSV numeric tables.

CSV dialect: comma separated, one header row, '.' decimal point, UTF-8,
LF line endings, numbers printed with 17 significant digits. JSON files
carry a "kind" tag; floats keep full precision through Python's shortest
round-trip repr.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .anneal import AnnealConfig
from .copula import CopulaModel, CorrelationMatrix
from .eeg import ColumnParams, Coupling, ElectrodeSite, RegionNet
from .errors import ParseError
from .marginals import ExponentialMarginal

INDEX_NAMES = ("epoch", "event_index", "index", "t")


def fmt(x: float) -> str:
    return "%.17g" % float(x)


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    return obj


def save_json(path, payload: dict) -> None:
    text = json.dumps(_jsonable(payload), indent=2)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text + "\n")


def load_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON at line {exc.lineno}") from exc


# ---------------------------------------------------------------- CSV tables

def write_table(path, header, rows) -> None:
    """Write a numeric table; rows iterate over sequences matching header."""
    width = len(header)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            if len(row) != width:
                raise ParseError("row width does not match header")
            fh.write(",".join(fmt(v) for v in row) + "\n")


def read_table(path):
    """Read a numeric CSV into (header tuple, float array (rows, cols))."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    if not lines or not lines[0].strip():
        raise ParseError(f"{path}: no data rows")
    header = tuple(name.strip() for name in lines[0].split(","))
    data = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != len(header):
            raise ParseError(f"{path}:{lineno}: expected {len(header)} fields, "
                             f"got {len(parts)}")
        try:
            data.append([float(p) for p in parts])
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from exc
    if not data:
        raise ParseError(f"{path}: no data rows")
    return header, np.asarray(data, dtype=float)


def write_series_csv(path, values, columns, index_name: str = "epoch") -> None:
    """Series table with a leading integer index column."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 2 or values.shape[1] != len(columns):
        raise ParseError("values must be (rows, len(columns))")
    header = (index_name, *columns)
    rows = ([float(i), *values[i]] for i in range(values.shape[0]))
    write_table(path, header, rows)


def read_series_csv(path):
    """Series table back as (channel names, (rows, channels) array).

    A leading index-like column (epoch, event_index, index, t) is dropped.
    """
    header, data = read_table(path)
    if header and header[0].lower() in INDEX_NAMES:
        return tuple(header[1:]), data[:, 1:]
    return tuple(header), data


def write_events_csv(path, batch) -> None:
    write_series_csv(path, batch.dx, batch.channels, index_name="event_index")


def write_bins_csv(path, distribution) -> None:
    edges = distribution.bin_edges
    counts = distribution.bin_counts
    rows = ([edges[i], edges[i + 1], float(counts[i])] for i in range(len(counts)))
    write_table(path, ("edge_low", "edge_high", "count"), rows)


# ----------------------------------------------------------- copula model IO

def marginal_to_dict(marginal: ExponentialMarginal) -> dict:
    return {
        "m": marginal.m,
        "chi": marginal.chi,
        "chi_minus": marginal.chi_minus,
        "chi_plus": marginal.chi_plus,
    }


def marginal_from_dict(d: dict) -> ExponentialMarginal:
    try:
        return ExponentialMarginal(m=float(d["m"]), chi=float(d["chi"]),
                                   chi_minus=(None if d.get("chi_minus") is None
                                              else float(d["chi_minus"])),
                                   chi_plus=(None if d.get("chi_plus") is None
                                             else float(d["chi_plus"])))
    except KeyError as exc:
        raise ParseError(f"marginal entry missing field {exc.args[0]!r}") from exc


def save_model(path, model: CopulaModel) -> None:
    payload = {
        "kind": "copula_model",
        "channels": list(model.channels),
        "marginals": [{"channel": ch, **marginal_to_dict(mg)}
                      for ch, mg in zip(model.channels, model.marginals)],
        "correlation": model.correlation.matrix,
    }
    save_json(path, payload)


def load_model(path) -> CopulaModel:
    d = load_json(path)
    if d.get("kind") != "copula_model":
        raise ParseError(f"{path}: expected kind 'copula_model'")
    try:
        channels = tuple(str(c) for c in d["channels"])
        marginals = tuple(marginal_from_dict(e) for e in d["marginals"])
        matrix = np.asarray(d["correlation"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: malformed model file ({exc})") from exc
    corr = CorrelationMatrix.from_matrix(matrix)
    if len(marginals) != len(channels) or corr.dim != len(channels):
        raise ParseError(f"{path}: channel count mismatch")
    return CopulaModel(marginals=marginals, correlation=corr, channels=channels)


# -------------------------------------------------------------- region net IO

def columns_to_dict(cols: ColumnParams) -> dict:
    return {
        "n_e": cols.n_e, "n_i": cols.n_i, "tau_ms": cols.tau_ms,
        "threshold": list(cols.threshold),
        "gain": [list(r) for r in cols.gain],
        "background": [list(r) for r in cols.background],
        "pol_mean": [list(r) for r in cols.pol_mean],
        "pol_var": [list(r) for r in cols.pol_var],
        "lr_count": cols.lr_count, "lr_gain": cols.lr_gain,
        "lr_background": cols.lr_background,
    }


def _pair(x):
    a, b = x
    return (float(a), float(b))


def columns_from_dict(d: dict) -> ColumnParams:
    try:
        return ColumnParams(
            n_e=float(d["n_e"]), n_i=float(d["n_i"]), tau_ms=float(d["tau_ms"]),
            threshold=_pair(d["threshold"]),
            gain=(_pair(d["gain"][0]), _pair(d["gain"][1])),
            background=(_pair(d["background"][0]), _pair(d["background"][1])),
            pol_mean=(_pair(d["pol_mean"][0]), _pair(d["pol_mean"][1])),
            pol_var=(_pair(d["pol_var"][0]), _pair(d["pol_var"][1])),
            lr_count=float(d["lr_count"]), lr_gain=float(d["lr_gain"]),
            lr_background=float(d["lr_background"]))
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ParseError(f"malformed columns block ({exc})") from exc


def net_to_dict(net: RegionNet) -> dict:
    return {
        "kind": "region_net",
        "dt_ms": net.dt_ms,
        "denominator_approx": net.denominator_approx,
        "columns": columns_to_dict(net.columns),
        "sites": [{"name": s.name, "offset": s.offset, "gain_e": s.gain_e,
                   "gain_i": s.gain_i, "trough_slope": s.trough_slope}
                  for s in net.sites],
        "couplings": [{"source": c.source, "target": c.target,
                       "weight": c.weight, "delay": c.delay}
                      for c in net.couplings],
    }


def net_from_dict(d: dict) -> RegionNet:
    try:
        sites = tuple(ElectrodeSite(name=str(s["name"]),
                                    offset=float(s["offset"]),
                                    gain_e=float(s["gain_e"]),
                                    gain_i=float(s["gain_i"]),
                                    trough_slope=float(s["trough_slope"]))
                      for s in d["sites"])
        couplings = tuple(Coupling(source=str(c["source"]), target=str(c["target"]),
                                   weight=float(c["weight"]), delay=int(c["delay"]))
                          for c in d.get("couplings", ()))
        return RegionNet(sites=sites, couplings=couplings,
                         columns=columns_from_dict(d["columns"]),
                         dt_ms=float(d.get("dt_ms", 5.2)),
                         denominator_approx=bool(d.get("denominator_approx", True)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed net block ({exc})") from exc


def save_net(path, net: RegionNet) -> None:
    save_json(path, net_to_dict(net))


def load_net(path) -> RegionNet:
    d = load_json(path)
    if d.get("kind") != "region_net":
        raise ParseError(f"{path}: expected kind 'region_net'")
    return net_from_dict(d)


# ------------------------------------------------------------- config blocks

_ANNEAL_KEYS = {
    "t0", "c", "accept_t0", "accept_c", "reanneal_interval",
    "acceptance_window", "window_repeat_tol", "max_trials", "k_max",
    "regen_attempts", "sensitivity_step", "seed", "x0",
}


def anneal_config_from_dict(d: dict) -> AnnealConfig:
    unknown = set(d) - _ANNEAL_KEYS
    if unknown:
        raise ParseError(f"unknown annealer option(s): {sorted(unknown)}")
    kwargs = dict(d)
    if "x0" in kwargs and kwargs["x0"] is not None:
        kwargs["x0"] = tuple(float(v) for v in kwargs["x0"])
    for key in ("reanneal_interval", "acceptance_window", "max_trials",
                "regen_attempts", "seed"):
        if key in kwargs:
            kwargs[key] = int(kwargs[key])
    return AnnealConfig(**kwargs)


def ensure_out_dir(path) -> str:
    os.makedirs(path, exist_ok=True)
    return str(path)
