"""Reading UCR-style datasets and writing alignment artifacts."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from ntw.interp import TimeSeries
from ntw.metrics import METRIC_KEYS
from ntw.warp_model import SampledWarping

logger = logging.getLogger(__name__)

FLOAT_FMT = ".17g"
DELIMITERS = {"csv": ",", "tsv": "\t"}


class DataFormatError(ValueError):
    """Input file could not be parsed."""


@dataclass
class Dataset:
    series: list
    path: str
    delimiter: str

    def labels(self) -> list:
        return sorted({s.label for s in self.series})


def _detect_delimiter(first_line: str) -> str:
    if "\t" in first_line:
        return "\t"
    if "," in first_line:
        return ","
    # UCR 2015 text files sometimes use runs of spaces
    return " "


def _split(line: str, delimiter: str) -> list:
    if delimiter == " ":
        return line.split()
    return [f.strip() for f in line.split(delimiter)]


def _parse_float(field: str, lineno: int, col: int, path) -> float:
    if field == "" or field.lower() in ("nan", "?"):
        return math.nan
    try:
        return float(field)
    except ValueError:
        raise DataFormatError(f"{path}:{lineno}: column {col}: cannot parse {field!r} as a number") from None


def load_ucr(path, delimiter: Optional[str] = None) -> Dataset:
    """Load a UCR-style file: one series per line, class label in the first field.

    The delimiter (tab, comma or whitespace) is detected from the first
    non-blank line unless given. Trailing empty/NaN fields are dropped so
    ragged rows can be stored NaN-padded.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc.strerror or exc}") from exc
    lines = [(n, ln) for n, ln in enumerate(text.splitlines(), start=1) if ln.strip()]
    if not lines:
        raise DataFormatError(f"{path}: no data rows")
    if delimiter is None:
        delimiter = _detect_delimiter(lines[0][1])

    series = []
    for row, (lineno, line) in enumerate(lines):
        fields = _split(line.strip(), delimiter)
        label_value = _parse_float(fields[0], lineno, 1, path)
        if not math.isfinite(label_value) or label_value != int(label_value):
            raise DataFormatError(f"{path}:{lineno}: column 1: label {fields[0]!r} is not an integer")
        values = [_parse_float(f, lineno, col, path) for col, f in enumerate(fields[1:], start=2)]
        while values and math.isnan(values[-1]):
            values.pop()
        if len(values) < 2:
            raise DataFormatError(f"{path}:{lineno}: row {row}: series shorter than 2 samples")
        bad = [col for col, v in enumerate(values, start=2) if not math.isfinite(v)]
        if bad:
            raise DataFormatError(f"{path}:{lineno}: column {bad[0]}: missing or non-finite value")
        series.append(TimeSeries(np.array(values), label=int(label_value), name=f"{path.stem}:{row}"))
    return Dataset(series, str(path), delimiter)


def select_class(ds: Dataset, label: int, max_series: int = 100, seed: int = 0) -> list:
    """Series of one class, subsampled without replacement to ``max_series``.

    File order is kept, also after subsampling.
    """
    members = [s for s in ds.series if s.label == label]
    if not members:
        raise ValueError(f"label {label} not present in {ds.path} (labels: {ds.labels()})")
    if len(members) < 2:
        raise ValueError(f"label {label} has fewer than two series")
    if len(members) > max_series:
        rng = np.random.default_rng(seed)
        keep = np.sort(rng.choice(len(members), size=max_series, replace=False))
        members = [members[i] for i in keep]
    return members


def znormalize(series: list) -> list:
    out = []
    for s in series:
        sd = s.values.std()
        values = s.values - s.values.mean()
        if sd > 0:
            values = values / sd
        out.append(TimeSeries(values, s.label, s.name))
    return out


def load_series_file(path) -> TimeSeries:
    """A single series: numbers separated by commas, tabs, spaces or newlines."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc.strerror or exc}") from exc
    fields = text.replace(",", " ").split()
    if not fields:
        raise DataFormatError(f"{path}: empty series")
    values = np.array([_parse_float(f, 1, c, path) for c, f in enumerate(fields, start=1)])
    if not np.all(np.isfinite(values)):
        raise DataFormatError(f"{path}: non-finite values")
    return values


def _fmt(x) -> str:
    return format(float(x), FLOAT_FMT)


def _write_csv(path: Path, header: list, rows) -> Path:
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def write_warpings(sw: SampledWarping, path) -> Path:
    header = ["z"] + [f"tau_{i + 1}" for i in range(sw.n_series)]
    rows = ([z, *map(int, sw.tau[:, z])] for z in range(sw.Z + 1))
    return _write_csv(Path(path), header, rows)


def write_aligned(aligned: np.ndarray, path) -> Path:
    N, Zp1 = aligned.shape
    header = ["z"] + [f"x_{i + 1}" for i in range(N)]
    rows = ([z, *map(_fmt, aligned[:, z])] for z in range(Zp1))
    return _write_csv(Path(path), header, rows)


def write_average(mean: np.ndarray, sd: np.ndarray, path) -> Path:
    rows = ([z, _fmt(m), _fmt(d)] for z, (m, d) in enumerate(zip(mean, sd)))
    return _write_csv(Path(path), ["z", "mean", "sd"], rows)


def write_loss_history(history, path) -> Path:
    rows = (
        [k, _fmt(d), _fmt(p), _fmt(a), _fmt(t)]
        for k, (d, p, a, t) in enumerate(zip(history.data_loss, history.penalty, history.alpha, history.total))
    )
    return _write_csv(Path(path), ["step", "data_loss", "penalty", "alpha", "total"], rows)


def write_metrics(metrics: dict, path) -> Path:
    missing = [k for k in METRIC_KEYS if k not in metrics]
    if missing:
        raise KeyError(f"metrics missing keys {missing}")
    path = Path(path)
    doc = {k: metrics[k] for k in METRIC_KEYS}
    try:
        path.write_text(json.dumps(doc, indent=2) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def write_plot(aligned: np.ndarray, mean: np.ndarray, sd: np.ndarray, path, title: str = "") -> Path:
    """Aligned series overlaid with the warped mean and a one-SD band, as SVG."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    z = np.arange(mean.size)
    with matplotlib.rc_context({"svg.hashsalt": "ntw", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(8, 4))
        for row in aligned:
            ax.plot(z, row, color="0.6", lw=0.5, alpha=0.5)
        ax.fill_between(z, mean - sd, mean + sd, color="tab:blue", alpha=0.25, lw=0)
        ax.plot(z, mean, color="tab:blue", lw=1.5)
        ax.set_xlabel("warped index z")
        if title:
            ax.set_title(title)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return Path(path)


def write_outputs(result, out_dir) -> list:
    """Write every artifact of an alignment run; returns the written paths."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc.strerror or exc}") from exc
    paths = [
        write_warpings(result.warping, out / "warpings.csv"),
        write_aligned(result.aligned, out / "aligned.csv"),
        write_average(result.average, result.sd, out / "average.csv"),
        write_loss_history(result.history, out / "loss_history.csv"),
        write_metrics(result.metrics, out / "metrics.json"),
        write_plot(result.aligned, result.average, result.sd, out / "plot.svg"),
    ]
    logger.info("wrote %d files to %s", len(paths), out)
    return paths


def _read_csv(path) -> tuple[list, list]:
    path = Path(path)
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc.strerror or exc}") from exc
    if not rows:
        raise DataFormatError(f"{path}: empty file")
    return rows[0], rows[1:]


def read_warpings(path, lengths=None) -> SampledWarping:
    """Inverse of :func:`write_warpings`.

    ``lengths`` defaults to the last row (the boundary condition makes it
    ``T_i``).
    """
    header, rows = _read_csv(path)
    if not header or header[0] != "z":
        raise DataFormatError(f"{path}: expected header starting with 'z'")
    try:
        table = np.array([[int(f) for f in r] for r in rows], dtype=np.int64)
    except ValueError as exc:
        raise DataFormatError(f"{path}: {exc}") from None
    if table.ndim != 2 or table.shape[0] < 2 or table.shape[1] != len(header):
        raise DataFormatError(f"{path}: malformed table")
    if not np.array_equal(table[:, 0], np.arange(table.shape[0])):
        raise DataFormatError(f"{path}: z column is not 0..Z")
    tau = table[:, 1:].T
    lengths = tau[:, -1] if lengths is None else np.asarray(lengths)
    return SampledWarping(tau, lengths)


def read_aligned(path) -> np.ndarray:
    header, rows = _read_csv(path)
    return np.array([[float(f) for f in r[1:]] for r in rows]).T


def write_config(config: dict, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(config, indent=2, sort_keys=True) + "\n")
    return path


def read_config(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: invalid JSON ({exc})") from exc
