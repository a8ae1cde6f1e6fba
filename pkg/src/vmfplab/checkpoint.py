"""Checkpoint persistence: raw little-endian float64 payload + JSON sidecar.

A checkpoint is a pair ``<base>.bin`` / ``<base>.json``.  The binary file is
the concatenation of the arrays named in the sidecar, each stored as
little-endian 8-byte floats in C order; the sidecar records the layout tag,
grid sizes, scalar parameters, time stamp and per-array shapes/offsets.
Round-trips are bit-exact.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .core import (DistributionField, EMState, LimitState, PerpGrid,
                   PlasmaParams, VelGrid)
from .errors import ParameterError

LAYOUT_TAG = "vmfplab-ckpt-1"
_PARAM_KEYS = ("q", "m", "sigma", "tau", "eps0", "mu0", "eps")


def _write(base: str, arrays: dict, meta: dict):
    offset = 0
    entries = []
    with open(base + ".bin", "wb") as fh:
        for name, arr in arrays.items():
            buf = np.ascontiguousarray(arr, dtype="<f8")
            fh.write(buf.tobytes())
            entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
            offset += buf.size
    meta = dict(meta)
    meta["layout"] = LAYOUT_TAG
    meta["arrays"] = entries
    with open(base + ".json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read(base: str):
    with open(base + ".json") as fh:
        meta = json.load(fh)
    if meta.get("layout") != LAYOUT_TAG:
        raise ParameterError(f"unknown checkpoint layout {meta.get('layout')!r}")
    raw = np.fromfile(base + ".bin", dtype="<f8")
    arrays = {}
    for entry in meta["arrays"]:
        size = int(np.prod(entry["shape"]))
        arrays[entry["name"]] = raw[entry["offset"]:entry["offset"] + size] \
            .reshape(entry["shape"]).astype(float)
    return arrays, meta


def _params_meta(params: PlasmaParams) -> dict:
    return {k: getattr(params, k) for k in _PARAM_KEYS}


def _grids_meta(grid: PerpGrid, vgrid: VelGrid | None) -> dict:
    meta = {"length": grid.length, "n1": grid.n1, "n2": grid.n2}
    if vgrid is not None:
        meta["vmax"] = vgrid.vmax
        meta["nv"] = vgrid.nv
    return meta


def save_kinetic(base: str, f: DistributionField, em: EMState, params: PlasmaParams):
    os.makedirs(os.path.dirname(base) or ".", exist_ok=True)
    arrays = {"f": f.values, "E": em.E, "B": em.B,
              "b_ext": params.b_ext, "d_background": params.d_background}
    meta = {"kind": "kinetic", "t": f.t,
            "grid": _grids_meta(f.grid, f.vgrid),
            "params": _params_meta(params)}
    _write(base, arrays, meta)


def load_kinetic(base: str):
    arrays, meta = _read(base)
    if meta["kind"] != "kinetic":
        raise ParameterError(f"checkpoint {base} is not a kinetic state")
    g = meta["grid"]
    grid = PerpGrid(g["length"], int(g["n1"]), int(g["n2"]))
    vgrid = VelGrid(g["vmax"], int(g["nv"]))
    params = PlasmaParams(grid=grid, b_ext=arrays["b_ext"],
                          d_background=arrays["d_background"],
                          **meta["params"])
    t = float(meta["t"])
    f = DistributionField(grid, vgrid, arrays["f"], t)
    em = EMState(grid, arrays["E"], arrays["B"], t)
    return f, em, params


def save_limit(base: str, state: LimitState, params: PlasmaParams):
    os.makedirs(os.path.dirname(base) or ".", exist_ok=True)
    arrays = {"n": state.n, "E": state.E, "b1": state.b1,
              "b_ext": params.b_ext, "d_background": params.d_background}
    meta = {"kind": "limit", "t": state.t,
            "grid": _grids_meta(state.grid, None),
            "params": _params_meta(params)}
    _write(base, arrays, meta)


def load_limit(base: str):
    arrays, meta = _read(base)
    if meta["kind"] != "limit":
        raise ParameterError(f"checkpoint {base} is not a limit state")
    g = meta["grid"]
    grid = PerpGrid(g["length"], int(g["n1"]), int(g["n2"]))
    params = PlasmaParams(grid=grid, b_ext=arrays["b_ext"],
                          d_background=arrays["d_background"],
                          **meta["params"])
    state = LimitState(grid, arrays["n"], arrays["E"], arrays["b1"], float(meta["t"]))
    return state, params
