"""Containers and file I/O for incompletely observed multivariate time series.

A series is a V x T grid of real values paired with a binary observation
mask of the same shape; a cell is meaningful only where its mask bit is 1.
Datasets bundle N such series with optional integer class labels
(0 = unlabeled, 1..n_classes otherwise).
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np


class FormatError(ValueError):
    """A dataset or label file violates the declared schema."""


@dataclass(frozen=True)
class MaskedMTS:
    """One multivariate time series with its observation mask."""

    values: np.ndarray  # (V, T)
    mask: np.ndarray    # (V, T) in {0, 1}
    series_id: int


@dataclass
class Dataset:
    """A collection of equally shaped masked series.

    values : (N, V, T) float array; entries are only meaningful where mask=1
    mask   : (N, V, T) array in {0, 1}
    labels : (N,) int array with 0 for unlabeled series, or None
    n_classes : number of classes the labels are drawn from
    ids    : (N,) unique integer series identifiers
    """

    values: np.ndarray
    mask: np.ndarray
    labels: np.ndarray | None
    n_classes: int
    ids: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.mask = np.asarray(self.mask, dtype=np.uint8)
        self.ids = np.asarray(self.ids, dtype=np.int64)
        if self.values.ndim != 3 or self.values.shape != self.mask.shape:
            raise ValueError("values and mask must both have shape (N, V, T)")
        if self.ids.shape != (self.values.shape[0],):
            raise ValueError("ids must have one entry per series")
        if len(np.unique(self.ids)) != len(self.ids):
            raise ValueError("series ids must be unique")
        if self.mask.size and not np.isin(self.mask, (0, 1)).all():
            raise ValueError("mask entries must be 0 or 1")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (self.values.shape[0],):
                raise ValueError("labels must have one entry per series")
            if self.labels.size and (
                self.labels.min() < 0 or self.labels.max() > self.n_classes
            ):
                raise ValueError("labels must lie in [0, n_classes]")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def n_attributes(self) -> int:
        return self.values.shape[1]

    @property
    def length(self) -> int:
        return self.values.shape[2]

    def series(self, i: int) -> MaskedMTS:
        return MaskedMTS(self.values[i], self.mask[i], int(self.ids[i]))

    def take(self, indices) -> "Dataset":
        """Row subset (copies), labels and ids travel with the rows."""
        indices = np.asarray(indices)
        labels = None if self.labels is None else self.labels[indices]
        return Dataset(self.values[indices].copy(), self.mask[indices].copy(),
                       labels, self.n_classes, self.ids[indices].copy())

    def restrict(self, attributes=None, time=None) -> "Dataset":
        """View on a subset of attributes and/or a contiguous time window."""
        values, mask = self.values, self.mask
        if attributes is not None:
            attributes = np.asarray(attributes)
            values = values[:, attributes, :]
            mask = mask[:, attributes, :]
        if time is not None:
            t0, t1 = time
            values = values[:, :, t0:t1]
            mask = mask[:, :, t0:t1]
        return Dataset(values, mask, self.labels, self.n_classes, self.ids)

    def one_hot(self) -> np.ndarray:
        """(N, n_classes) indicator matrix; unlabeled series give zero rows."""
        if self.labels is None:
            raise ValueError("dataset has no labels")
        return labels_to_onehot(self.labels, self.n_classes)


def labels_to_onehot(labels: np.ndarray, n_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((len(labels), n_classes))
    present = labels > 0
    out[np.nonzero(present)[0], labels[present] - 1] = 1.0
    return out


# ------------------------------------------------------------
# Long-format CSV I/O
# ------------------------------------------------------------

_DATA_HEADER = "series_id,attribute,time,value"
_LABEL_HEADER = "series_id,label"


def _parse_metadata(line: str, path) -> dict:
    if not line.startswith("#"):
        raise FormatError(f"{path}: first line must be a '# N=..,V=..,T=..,N_c=..' header")
    meta = {}
    for item in line.lstrip("#").strip().split(","):
        if "=" not in item:
            raise FormatError(f"{path}: malformed metadata item {item!r}")
        key, _, value = item.partition("=")
        meta[key.strip()] = value.strip()
    try:
        return {k: int(meta[k]) for k in ("N", "V", "T", "N_c")}
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}: metadata must declare integer N, V, T, N_c") from exc


def load_dataset(path, label_path=None) -> Dataset:
    """Read a long-format data CSV (plus optional label CSV) into a Dataset.

    Each data row gives one observed cell as ``series_id,attribute,time,value``
    with 1-based integer indices; cells without a row are missing. The first
    line is a comment declaring the dataset dimensions, e.g.
    ``# N=400,V=2,T=50,N_c=2``.
    """
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines:
        raise FormatError(f"{path}: empty file, expected a metadata header")
    meta = _parse_metadata(lines[0], path)
    n, v_dim, t_dim, n_classes = meta["N"], meta["V"], meta["T"], meta["N_c"]
    if len(lines) < 2 or lines[1].strip() != _DATA_HEADER:
        raise FormatError(f"{path}: expected header '{_DATA_HEADER}'")

    values = np.zeros((n, v_dim, t_dim))
    mask = np.zeros((n, v_dim, t_dim), dtype=np.uint8)
    for ln_no, raw in enumerate(lines[2:], start=3):
        if not raw.strip():
            continue
        parts = raw.split(",")
        if len(parts) != 4:
            raise FormatError(f"{path}:{ln_no}: expected 4 fields, got {len(parts)}")
        try:
            sid, attr, t = int(parts[0]), int(parts[1]), int(parts[2])
            val = float(parts[3])
        except ValueError as exc:
            raise FormatError(f"{path}:{ln_no}: malformed row {raw!r}") from exc
        if not (1 <= sid <= n):
            raise FormatError(f"{path}:{ln_no}: series_id {sid} outside [1, {n}]")
        if not (1 <= attr <= v_dim):
            raise FormatError(f"{path}:{ln_no}: attribute {attr} outside [1, {v_dim}]")
        if not (1 <= t <= t_dim):
            raise FormatError(f"{path}:{ln_no}: time {t} outside [1, {t_dim}]")
        if mask[sid - 1, attr - 1, t - 1]:
            raise FormatError(f"{path}:{ln_no}: duplicate cell ({sid},{attr},{t})")
        values[sid - 1, attr - 1, t - 1] = val
        mask[sid - 1, attr - 1, t - 1] = 1

    labels = None
    if label_path is not None:
        labels = np.zeros(n, dtype=np.int64)
        with open(label_path) as fh:
            label_lines = [ln.rstrip("\n") for ln in fh]
        if not label_lines or label_lines[0].strip() != _LABEL_HEADER:
            raise FormatError(f"{label_path}: expected header '{_LABEL_HEADER}'")
        for ln_no, raw in enumerate(label_lines[1:], start=2):
            if not raw.strip():
                continue
            parts = raw.split(",")
            if len(parts) != 2:
                raise FormatError(f"{label_path}:{ln_no}: expected 2 fields")
            try:
                sid = int(parts[0])
            except ValueError as exc:
                raise FormatError(f"{label_path}:{ln_no}: bad series_id") from exc
            if not (1 <= sid <= n):
                raise FormatError(f"{label_path}:{ln_no}: series_id {sid} outside [1, {n}]")
            text = parts[1].strip()
            if not text:
                continue  # unlabeled
            try:
                label = int(text)
            except ValueError as exc:
                raise FormatError(f"{label_path}:{ln_no}: bad label {text!r}") from exc
            if not (1 <= label <= n_classes):
                raise FormatError(
                    f"{label_path}:{ln_no}: label {label} outside [1, {n_classes}]")
            labels[sid - 1] = label

    return Dataset(values, mask, labels, n_classes, np.arange(1, n + 1))


def save_dataset(data: Dataset, path, label_path=None) -> None:
    """Write a Dataset back to the long-format CSV (inverse of load_dataset).

    Series are written in id order and re-numbered 1..N, so a freshly loaded
    file round-trips bit-exactly.
    """
    order = np.argsort(data.ids)
    with open(path, "w") as fh:
        fh.write(f"# N={data.n},V={data.n_attributes},T={data.length},N_c={data.n_classes}\n")
        fh.write(_DATA_HEADER + "\n")
        for row, i in enumerate(order, start=1):
            vs, ts = np.nonzero(data.mask[i])
            for v, t in zip(vs, ts):
                fh.write(f"{row},{v + 1},{t + 1},{data.values[i, v, t]:.17g}\n")
    if label_path is not None:
        with open(label_path, "w") as fh:
            fh.write(_LABEL_HEADER + "\n")
            for row, i in enumerate(order, start=1):
                label = "" if data.labels is None or data.labels[i] == 0 else str(int(data.labels[i]))
                fh.write(f"{row},{label}\n")


# ------------------------------------------------------------
# Preprocessing
# ------------------------------------------------------------

@dataclass(frozen=True)
class StandardizationStats:
    """Per-attribute location/scale computed over observed entries only."""

    mean: np.ndarray      # (V,)
    std: np.ndarray       # (V,) sample standard deviation; 0 for constants
    constant: np.ndarray  # (V,) bool, attribute had no spread

    def apply(self, data: Dataset) -> Dataset:
        """Transform observed cells; cells under mask=0 are left untouched."""
        if data.n_attributes != len(self.mean):
            raise ValueError(
                f"schema mismatch: statistics cover {len(self.mean)} attributes "
                f"but the dataset has {data.n_attributes}")
        mean = self.mean[None, :, None]
        std = np.where(self.std > 0, self.std, 1.0)[None, :, None]
        scaled = (data.values - mean) / std
        scaled = np.where(self.constant[None, :, None], 0.0, scaled)
        new_values = np.where(data.mask.astype(bool), scaled, data.values)
        return replace(data, values=new_values, mask=data.mask.copy())


def standardize(data: Dataset) -> tuple[Dataset, StandardizationStats]:
    """Scale every attribute to zero mean / unit sample std over observed cells.

    Attributes without spread (including single-observation ones) are flagged
    constant and mapped to 0; an attribute with no observed cell at all is an
    error.
    """
    v_dim = data.n_attributes
    mean = np.zeros(v_dim)
    std = np.zeros(v_dim)
    constant = np.zeros(v_dim, dtype=bool)
    obs = data.mask.astype(bool)
    for v in range(v_dim):
        cells = data.values[:, v, :][obs[:, v, :]]
        if cells.size == 0:
            raise ValueError(f"attribute {v + 1} has no observed entries")
        mean[v] = cells.mean()
        sd = cells.std(ddof=1) if cells.size > 1 else 0.0
        if sd == 0.0:
            constant[v] = True
        std[v] = sd
    stats = StandardizationStats(mean, std, constant)
    return stats.apply(data), stats


def resample_length(data: Dataset, cap: int = 25) -> Dataset:
    """Shorten series to at most ``cap`` steps with non-overlapping window means.

    The output length is ``ceil(T / ceil(T / cap))``; a window's value is the
    mean of its observed cells and its mask is set iff at least one cell was
    observed. Series shorter than the dataset length are assumed already
    padded with mask=0.
    """
    if cap < 1:
        raise ValueError("cap must be >= 1")
    t_dim = data.length
    width = -(-t_dim // cap)          # ceil(T / cap)
    t_out = -(-t_dim // width)        # ceil(T / width)
    values = np.zeros((data.n, data.n_attributes, t_out))
    mask = np.zeros((data.n, data.n_attributes, t_out), dtype=np.uint8)
    obs = data.mask.astype(bool)
    safe = np.where(obs, data.values, 0.0)
    for j in range(t_out):
        window = slice(j * width, min((j + 1) * width, t_dim))
        counts = obs[:, :, window].sum(axis=2)
        totals = safe[:, :, window].sum(axis=2)
        has = counts > 0
        values[:, :, j] = np.where(has, totals / np.maximum(counts, 1), 0.0)
        mask[:, :, j] = has
    return replace(data, values=values, mask=mask)


def concat_mask(data: Dataset) -> Dataset:
    """Append the observation mask as V extra fully observed real attributes."""
    values = np.concatenate([data.values, data.mask.astype(float)], axis=1)
    mask = np.concatenate([data.mask, np.ones_like(data.mask)], axis=1)
    return replace(data, values=values, mask=mask)


def zero_impute(data: Dataset) -> Dataset:
    """Replace missing cells with 0 and mark everything observed."""
    values = np.where(data.mask.astype(bool), data.values, 0.0)
    return replace(data, values=values, mask=np.ones_like(data.mask))


def poison_missing(data: Dataset, poison: float = np.nan) -> Dataset:
    """Overwrite unobserved cells with a poison value (debug aid).

    Downstream code must never read cells under mask=0, so piping a poisoned
    dataset through a computation and checking the result is finite (and
    unchanged) exposes mask violations.
    """
    values = np.where(data.mask.astype(bool), data.values, poison)
    return replace(data, values=values, mask=data.mask.copy())
