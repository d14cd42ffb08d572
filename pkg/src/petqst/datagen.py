"""Dataset construction, stratified splits and on-disk formats.

Binary layout (``samples.bin``): the 8-byte magic ``TQSTDS01`` followed by
fixed-length little-endian f64 records of
``4**n`` inputs + ``4**n`` target parameters + 1 purity + 5 meta fields
(zeros, rank, pure flag, noise strength, measurements performed). A JSON
``manifest.json`` next to it carries the generating spec and the counts.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, InvalidSpec, TooSmall
from .numerics import derive_rng
from .qstate import NoiseSpec, StateSpec, dim_of, generate_state, purity
from .reconstruct import matrix_to_params
from .tqst import MeasurementRecord, noisy_pipeline, select_measurements, simulate_outcomes

MAGIC = b"TQSTDS01"
FORMAT_VERSION = 1
META_FIELDS = ("zeros", "rank", "pure", "noise_strength", "measurements")
SPLIT_FRACTIONS = (0.90, 0.05, 0.05)


@dataclass(frozen=True)
class DatasetSpec:
    n_qubits: int
    per_pair: int
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    seed: int = 0
    threshold: float | None = None
    """Manual threshold override; ``None`` uses the Gini rule."""

    def zr_pairs(self) -> list[tuple[int, int]]:
        d = dim_of(self.n_qubits)
        return [(z, r) for z in range(d - 1) for r in range(2, d - z + 1)]

    @property
    def total(self) -> int:
        d = dim_of(self.n_qubits)
        return 2 * self.per_pair * (d // 2) * (d - 1)

    def validate(self) -> None:
        if not 1 <= self.n_qubits <= 4:
            raise InvalidSpec("datasets support 1 to 4 qubits")
        if self.per_pair < 1:
            raise InvalidSpec("per_pair must be >= 1")
        self.noise.validate(self.n_qubits)

    def to_dict(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "per_pair": self.per_pair,
            "noise": {"kind": self.noise.kind, "strength": self.noise.strength},
            "seed": self.seed,
            "threshold": self.threshold,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetSpec":
        return cls(
            n_qubits=int(d["n_qubits"]),
            per_pair=int(d["per_pair"]),
            noise=NoiseSpec(d["noise"]["kind"], float(d["noise"]["strength"])),
            seed=int(d["seed"]),
            threshold=d.get("threshold"),
        )


@dataclass
class Dataset:
    n_qubits: int
    inputs: np.ndarray
    targets: np.ndarray
    purity: np.ndarray
    meta: np.ndarray
    spec: DatasetSpec | None = None

    def __len__(self) -> int:
        return len(self.inputs)

    @property
    def zeros(self) -> np.ndarray:
        return self.meta[:, 0].astype(int)

    @property
    def rank(self) -> np.ndarray:
        return self.meta[:, 1].astype(int)

    @property
    def pure(self) -> np.ndarray:
        return self.meta[:, 2] > 0.5

    @property
    def measurements(self) -> np.ndarray:
        return self.meta[:, 4].astype(int)

    def subset(self, idx: np.ndarray) -> "Dataset":
        return Dataset(self.n_qubits, self.inputs[idx], self.targets[idx], self.purity[idx], self.meta[idx], self.spec)

    def task_targets(self, task: str) -> np.ndarray:
        return self.targets if task == "tomography" else self.purity[:, None]


def sample_plan(spec: DatasetSpec) -> list[StateSpec]:
    """One StateSpec per sample: every mixed (z, r) pair ``per_pair`` times, then as many pure states."""
    mixed = [StateSpec(spec.n_qubits, z, r) for z, r in spec.zr_pairs() for _ in range(spec.per_pair)]
    pure = [StateSpec(spec.n_qubits, s.zeros, 1, pure=True) for s in mixed]
    return mixed + pure


def build_sample(spec: DatasetSpec, index: int, state_spec: StateSpec):
    """Clean state, noisy record and meta row for sample ``index``.

    The clean state depends only on ``(seed, index)``, so datasets with
    different noise settings share the same underlying states.
    """
    rho = generate_state(derive_rng(spec.seed, index, 0), state_spec)
    record, _ = noisy_pipeline(derive_rng(spec.seed, index, 1), rho, spec.noise, spec.threshold)
    meta = (state_spec.zeros, state_spec.rank, float(state_spec.pure), spec.noise.strength, record.n_performed)
    return rho, record, meta


def build_dataset(spec: DatasetSpec) -> Dataset:
    spec.validate()
    plan = sample_plan(spec)
    length = 4**spec.n_qubits
    inputs = np.empty((len(plan), length))
    targets = np.empty((len(plan), length))
    pur = np.empty(len(plan))
    meta = np.empty((len(plan), len(META_FIELDS)))
    for k, state_spec in enumerate(plan):
        rho, record, row = build_sample(spec, k, state_spec)
        inputs[k] = record.values
        targets[k] = matrix_to_params(rho)
        pur[k] = purity(rho)
        meta[k] = row
    return Dataset(spec.n_qubits, inputs, targets, pur, meta, spec)


def _allocate(sizes: np.ndarray, fraction: float, total: int) -> np.ndarray:
    """Largest-remainder allocation of ``total`` items across strata proportionally to ``sizes``."""
    raw = sizes * fraction
    base = np.floor(raw).astype(int)
    short = total - base.sum()
    if short > 0:
        order = np.argsort(-(raw - base), kind="stable")
        base[order[:short]] += 1
    return np.minimum(base, sizes)


def split(dataset: Dataset, fractions=SPLIT_FRACTIONS, seed: int = 0):
    """Stratified (by pure flag and zero count) seeded split into index arrays ``(train, val, test)``."""
    n = len(dataset)
    if n == 0:
        raise TooSmall("cannot split an empty dataset")
    f_train, f_val, f_test = fractions
    if abs(f_train + f_val + f_test - 1.0) > 1e-9:
        raise InvalidSpec("split fractions must sum to 1")
    keys = dataset.pure.astype(int) * 1000 + dataset.zeros
    strata = np.unique(keys)
    members = [np.flatnonzero(keys == s) for s in strata]
    sizes = np.array([len(m) for m in members])
    n_val = int(round(f_val * n))
    n_test = int(round(f_test * n))
    val_k = _allocate(sizes, f_val, n_val)
    test_k = _allocate(sizes - val_k, f_test / max(1.0 - f_val, 1e-12), n_test)
    rng = derive_rng(seed, 3)
    train, val, test = [], [], []
    for m, nv, nt in zip(members, val_k, test_k):
        m = m[rng.permutation(len(m))]
        val.append(m[:nv])
        test.append(m[nv : nv + nt])
        train.append(m[nv + nt :])
    out = tuple(np.sort(np.concatenate(part)) for part in (train, val, test))
    if any(len(part) == 0 for part in out):
        raise TooSmall(f"split of {n} samples leaves an empty part: {[len(p) for p in out]}")
    return out


def _record_length(n_qubits: int) -> int:
    return 2 * 4**n_qubits + 1 + len(META_FIELDS)


def save_dataset(dataset: Dataset, directory: str | Path) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    table = np.concatenate([dataset.inputs, dataset.targets, dataset.purity[:, None], dataset.meta], axis=1)
    with open(directory / "samples.bin", "wb") as fh:
        fh.write(MAGIC)
        fh.write(np.ascontiguousarray(table, dtype="<f8").tobytes())
    manifest = {
        "format": MAGIC.decode(),
        "version": FORMAT_VERSION,
        "n_qubits": dataset.n_qubits,
        "count": len(dataset),
        "n_pure": int(dataset.pure.sum()),
        "n_mixed": int((~dataset.pure).sum()),
        "record_length": _record_length(dataset.n_qubits),
        "meta_fields": list(META_FIELDS),
        "samples_file": "samples.bin",
        "spec": dataset.spec.to_dict() if dataset.spec else None,
        "mean_measurements": float(dataset.measurements.mean()) if len(dataset) else 0.0,
    }
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return directory


def load_dataset(directory: str | Path) -> Dataset:
    directory = Path(directory)
    try:
        manifest = json.loads((directory / "manifest.json").read_text())
    except FileNotFoundError:
        raise FormatError(f"no manifest.json in {directory}") from None
    if manifest.get("format") != MAGIC.decode():
        raise FormatError(f"unsupported dataset format {manifest.get('format')!r}")
    n = int(manifest["n_qubits"])
    length = _record_length(n)
    raw = (directory / manifest.get("samples_file", "samples.bin")).read_bytes()
    if raw[:8] != MAGIC:
        raise FormatError("bad magic in samples file")
    body = np.frombuffer(raw[8:], dtype="<f8")
    if body.size != manifest["count"] * length:
        raise FormatError("samples file size does not match manifest")
    table = body.reshape(-1, length).astype(np.float64)
    L = 4**n
    spec = DatasetSpec.from_dict(manifest["spec"]) if manifest.get("spec") else None
    return Dataset(n, table[:, :L], table[:, L : 2 * L], table[:, 2 * L], table[:, 2 * L + 1 :], spec)


def csv_header(n_qubits: int, with_targets: bool = True) -> list[str]:
    L = 4**n_qubits
    cols = list(META_FIELDS) + [f"x{k}" for k in range(L)]
    if with_targets:
        cols += [f"y{k}" for k in range(L)] + ["purity"]
    return cols


def export_csv(dataset: Dataset, path: str | Path) -> Path:
    """One row per sample: meta fields, inputs ``x*``, target parameters ``y*`` and purity."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(csv_header(dataset.n_qubits))
        for k in range(len(dataset)):
            row = list(dataset.meta[k]) + list(dataset.inputs[k]) + list(dataset.targets[k]) + [dataset.purity[k]]
            w.writerow([repr(float(v)) for v in row])
    return path


def import_csv(path: str | Path) -> Dataset:
    """Read records in the CSV schema; only the ``x*`` columns are mandatory.

    Missing targets are filled with NaN and missing meta fields with defaults
    (measurements recomputed from the sentinel pattern). This is the entry
    point for externally measured records.
    """
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise FormatError(f"{path} holds no records")
    xcols = sorted((c for c in rows[0] if c and c.startswith("x")), key=lambda c: int(c[1:]))
    L = len(xcols)
    d = int(round(np.sqrt(L)))
    if L == 0 or d * d != L or d & (d - 1):
        raise FormatError(f"{path}: expected 4**n input columns x0.., found {L}")
    n = d.bit_length() - 1
    try:
        inputs = np.array([[float(r[c]) for c in xcols] for r in rows])
        has_y = "y0" in rows[0]
        targets = (
            np.array([[float(r[f"y{k}"]) for k in range(L)] for r in rows]) if has_y else np.full((len(rows), L), np.nan)
        )
        pur = np.array([float(r["purity"]) for r in rows]) if "purity" in rows[0] else np.full(len(rows), np.nan)
        meta = np.zeros((len(rows), len(META_FIELDS)))
        for j, name in enumerate(META_FIELDS):
            if name in rows[0]:
                meta[:, j] = [float(r[name]) for r in rows]
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}: {exc}") from None
    if "measurements" not in rows[0]:
        meta[:, 4] = [MeasurementRecord(n, x).n_performed for x in inputs]
    for x in inputs:
        MeasurementRecord(n, x).validate()
    return Dataset(n, inputs, targets, pur, meta)


def record_from_state(rho: np.ndarray, threshold: float | None = None) -> MeasurementRecord:
    """Noiseless threshold-protocol record of ``rho``."""
    return simulate_outcomes(rho, select_measurements(rho.diagonal().real, threshold))
