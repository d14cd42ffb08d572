"""Evaluation reports: fidelity for tomography, MSE and R^2 for purity.

Reports are plain dicts (JSON-ready) validated by
``schemas/eval_report.schema.json``; per-sample rows go to CSV.
"""

from __future__ import annotations

import csv
import json
from importlib import resources
from pathlib import Path

import numpy as np

from .datagen import Dataset
from .qstate import dim_of, fidelity
from .reconstruct import clamp_purity, params_to_matrix, reconstruct_state

SCHEMA_VERSION = 1


def zero_buckets(n_qubits: int) -> list[tuple[int, int]]:
    """Zero-count strata: one per count up to 2 qubits, then groups of five (0-4, 5-9, 10-14)."""
    top = dim_of(n_qubits) - 2
    if top <= 2:
        return [(z, z) for z in range(top + 1)]
    return [(lo, min(lo + 4, top)) for lo in range(0, top + 1, 5)]


def _bucket_rows(values: np.ndarray, zeros: np.ndarray, n_qubits: int, reducer) -> list[dict]:
    rows = []
    for lo, hi in zero_buckets(n_qubits):
        sel = (zeros >= lo) & (zeros <= hi)
        rows.append(
            {
                "zeros": f"{lo}" if lo == hi else f"{lo}-{hi}",
                "count": int(sel.sum()),
                **(reducer(sel) if sel.any() else {"mean": None, "std": None}),
            }
        )
    return rows


def r_squared(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    """1 - SS_res / SS_tot with the squared total sum of squares."""
    ss_res = float(np.sum((y_true - y_pred) ** 2))
    ss_tot = float(np.sum((y_true - np.mean(y_true)) ** 2))
    return 1.0 - ss_res / ss_tot if ss_tot > 0 else float("nan")


def _meta_rows(ds: Dataset) -> list[dict]:
    return [
        {
            "zeros": int(m[0]),
            "rank": int(m[1]),
            "pure": bool(m[2] > 0.5),
            "noise_strength": float(m[3]),
            "measurements": int(m[4]),
        }
        for m in ds.meta
    ]


def tomography_report(ds: Dataset, predicted_states: np.ndarray, label: str = "") -> dict:
    truth = params_to_matrix(ds.targets)
    fid = np.atleast_1d(fidelity(truth, predicted_states))
    rows = [dict(meta, fidelity=float(f)) for meta, f in zip(_meta_rows(ds), fid)]
    return {
        "schema_version": SCHEMA_VERSION,
        "task": "tomography",
        "label": label,
        "n_qubits": ds.n_qubits,
        "n_samples": len(ds),
        "aggregate": {
            "fidelity_mean": float(fid.mean()),
            "fidelity_std": float(fid.std()),
            "mean_measurements": float(ds.measurements.mean()),
        },
        "stratified": _bucket_rows(
            fid, ds.zeros, ds.n_qubits, lambda s: {"mean": float(fid[s].mean()), "std": float(fid[s].std())}
        ),
        "rows": rows,
    }


def tomography_report_from_outputs(ds: Dataset, outputs: np.ndarray, label: str = "") -> dict:
    return tomography_report(ds, reconstruct_state(outputs), label)


def purity_report(ds: Dataset, predicted: np.ndarray, label: str = "", clamp: bool = True) -> dict:
    y = ds.purity
    yp = np.asarray(predicted, dtype=float).reshape(-1)
    if clamp:
        yp = clamp_purity(yp, ds.n_qubits)
    err = (yp - y) ** 2
    rows = [dict(meta, purity=float(a), predicted=float(b), squared_error=float(e)) for meta, a, b, e in zip(_meta_rows(ds), y, yp, err)]
    return {
        "schema_version": SCHEMA_VERSION,
        "task": "purity",
        "label": label,
        "n_qubits": ds.n_qubits,
        "n_samples": len(ds),
        "aggregate": {
            "mse": float(err.mean()),
            "r2": r_squared(y, yp),
            "mean_measurements": float(ds.measurements.mean()),
        },
        "stratified": _bucket_rows(
            err, ds.zeros, ds.n_qubits, lambda s: {"mean": float(err[s].mean()), "std": float(err[s].std())}
        ),
        "rows": rows,
    }


def load_schema() -> dict:
    text = resources.files("petqst").joinpath("schemas/eval_report.schema.json").read_text()
    return json.loads(text)


def validate_report(report: dict) -> None:
    import jsonschema

    jsonschema.validate(report, load_schema())


def write_report(report: dict, json_path: str | Path | None = None, csv_path: str | Path | None = None) -> None:
    if json_path is not None:
        Path(json_path).parent.mkdir(parents=True, exist_ok=True)
        Path(json_path).write_text(json.dumps(report, indent=2) + "\n")
    if csv_path is not None and report["rows"]:
        Path(csv_path).parent.mkdir(parents=True, exist_ok=True)
        with open(csv_path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(report["rows"][0]))
            w.writeheader()
            w.writerows(report["rows"])


def summary_line(report: dict) -> str:
    agg = report["aggregate"]
    if report["task"] == "tomography":
        return f"fidelity {agg['fidelity_mean']:.4f} +/- {agg['fidelity_std']:.4f} over {report['n_samples']} samples"
    return f"MSE {agg['mse']:.4f}  R2 {agg['r2']:.4f} over {report['n_samples']} samples"


def magnitude_phase_table(rho: np.ndarray) -> str:
    """Text rendering of |rho_ij| and arg(rho_ij) (degrees), one matrix row per line."""
    d = rho.shape[-1]
    width = max(2, len(bin(d - 1)) - 2)
    labels = [format(k, f"0{width}b") for k in range(d)]
    lines = ["magnitude / phase[deg]", "      " + " ".join(f"{lab:>14}" for lab in labels)]
    for i in range(d):
        cells = []
        for j in range(d):
            mag = abs(rho[i, j])
            phase = np.degrees(np.angle(rho[i, j])) if mag > 1e-12 else 0.0
            cells.append(f"{mag:6.3f}/{phase:+7.1f}")
        lines.append(f"{labels[i]:>5} " + " ".join(f"{c:>14}" for c in cells))
    return "\n".join(lines)


def state_document(rho: np.ndarray, **extra) -> dict:
    rho = np.asarray(rho)
    return {
        "n_qubits": int(rho.shape[-1]).bit_length() - 1,
        "real": rho.real.tolist(),
        "imag": rho.imag.tolist(),
        "magnitude_phase": magnitude_phase_table(rho),
        **extra,
    }


def state_from_document(doc: dict) -> np.ndarray:
    return np.asarray(doc["real"], dtype=float) + 1j * np.asarray(doc["imag"], dtype=float)
