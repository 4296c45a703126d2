"""Plain-text output writers.  Every file starts with a line naming its columns or fields."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

SNAPSHOT_COLUMNS = ("t", "x", "rho1", "rho2", "sigma", "r", "omega", "phi")
SWEEP_COLUMNS = ("eta", "n", "mode", "residual")
CAUCHY_COLUMNS = ("eta", "eta_half", "l1_distance")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")


def write_snapshots(path, traj) -> Path:
    from .solver import transform

    path = Path(path)
    x = traj.grid.centers
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SNAPSHOT_COLUMNS)
        for k, s in enumerate(traj.states):
            sigma, r = transform(s)
            omega, phi = traj.omega_phi(k)
            for row in zip(np.full(x.size, s.t), x, s.rho1, s.rho2, sigma, r, omega, phi):
                w.writerow([repr(float(v)) for v in row])
    return path


def write_diagnostics(path, records) -> Path:
    path = Path(path)
    with path.open("w") as fh:
        fields = list(records[0].to_dict().keys()) if records else []
        fh.write(json.dumps({"schema": fields}) + "\n")
        for r in records:
            fh.write(json.dumps(r.to_dict(), default=_json_default) + "\n")
    return path


def write_summary_csv(path, records) -> Path:
    path = Path(path)
    cols = ("t", "mass1", "mass2", "tv_r", "tv_phi", "energy_F", "dissipation_D", "fisher",
            "min_sigma", "max_sigma", "clip_counter")
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols + ("b_total",))
        for r in records:
            d = r.to_dict()
            w.writerow([repr(d[c]) for c in cols] + [repr(r.b_ledger["total"])])
    return path


def write_rows(path, columns, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return path


def write_json(path, payload) -> Path:
    path = Path(path)
    path.write_text(json.dumps(payload, indent=2, default=_json_default) + "\n")
    return path
