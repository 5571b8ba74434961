"""CSV, SVG and JSON emission of run records."""

import csv
import json
import logging
import re
from collections.abc import Sequence
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from pydantic import BaseModel  # noqa: E402

from .record import SimRecord  # noqa: E402

LOG = logging.getLogger(__name__)

LOG_FLOOR = 1e-12

SVG_RC = {
    "svg.hashsalt": "ffts-eso",
    "svg.fonttype": "none",
    "path.simplify": False,
}

_HEADER = re.compile(r"^(?P<name>.+) \[(?P<unit>.*)\]$")

# (column group, legend label) per observer
_SERIES = {
    "e_phi": (("e_phi", "FFTS-ESO"), ("leso_e_phi", "LESO"), ("fxtsdo_e_phi", "FxTSDO")),
    "e_tau": (("e_tau", "FFTS-ESO"), ("leso_e_tau", "LESO"), ("fxtsdo_e_tau", "FxTSDO")),
}


def _prepare(path: Path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OSError(f"cannot create directory {path.parent}: {e}") from e
    return path


def emit_csv(rec: SimRecord, path: Path) -> Path:
    """Write ``rec`` as CSV: one header row with units, one row per sample.

    Values are written with ``repr`` so they parse back to the same double.

    Raises:
        OSError: If the file cannot be written; the message names the path.
    """
    path = _prepare(path)
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(rec.headers)
            for row in rec.data:
                writer.writerow([repr(float(v)) for v in row])
    except OSError as e:
        raise OSError(f"cannot write {path}: {e}") from e
    LOG.info("wrote %s (%d rows)", path, rec.rows)
    return path


def read_csv(path: Path) -> SimRecord:
    """Parse a file written by :func:`emit_csv`.

    Raises:
        OSError: If the file cannot be read.
        ValueError: If a header cell lacks its ``[unit]`` suffix.
    """
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = [[float(v) for v in row] for row in reader]
    except OSError as e:
        raise OSError(f"cannot read {path}: {e}") from e

    columns, units = [], []
    for cell in header:
        m = _HEADER.match(cell)
        if m is None:
            raise ValueError(f"{path}: malformed header cell {cell!r}")
        columns.append(m["name"])
        units.append(m["unit"])
    data = np.array(rows, dtype=float).reshape(len(rows), len(columns))
    return SimRecord(name=path.stem, columns=columns, units=units, data=data)


def build_error_figure(rec: SimRecord, log_scale: bool = True):
    """Force and torque estimation-error norms against time, one series per observer.

    Each series is tagged with the SVG group id ``series-<column group>``.
    """
    t = rec["t"]
    fig, axes = plt.subplots(2, 1, figsize=(8.0, 6.0), sharex=True)
    for ax, (group, ylabel) in zip(axes, (("e_phi", "|e_phi| [N]"), ("e_tau", "|e_tau| [N m]"))):
        for key, label in _SERIES[group]:
            if key not in rec:
                continue
            y = rec.norm(key)
            if log_scale:
                y = np.maximum(y, LOG_FLOOR)
            ax.plot(t, y, label=label, linewidth=0.8, gid=f"series-{key}")
        if log_scale:
            ax.set_yscale("log")
        ax.set_ylabel(ylabel)
        ax.grid(True, which="both", linewidth=0.3)
        ax.legend(loc="upper right")
    axes[0].set_title(rec.name)
    axes[-1].set_xlabel("t [s]")
    fig.tight_layout()
    return fig


def emit_plots(rec: SimRecord, path: Path, log_scale: bool = True) -> Path:
    """Render the estimation-error figure of ``rec`` to a self-contained SVG.

    Raises:
        OSError: If the file cannot be written; the message names the path.
    """
    path = _prepare(path)
    with matplotlib.rc_context(SVG_RC):
        fig = build_error_figure(rec, log_scale)
        try:
            fig.savefig(path, format="svg", metadata={"Date": None})
        except OSError as e:
            raise OSError(f"cannot write {path}: {e}") from e
        finally:
            plt.close(fig)
    LOG.info("wrote %s", path)
    return path


def write_summary(summaries: Sequence[BaseModel], path: Path) -> Path:
    """Write run summaries as a JSON list."""
    path = _prepare(path)
    payload = [s.model_dump(mode="json") for s in summaries]
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    except OSError as e:
        raise OSError(f"cannot write {path}: {e}") from e
    LOG.info("wrote %s", path)
    return path
