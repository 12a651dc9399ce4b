"""Atomic CSV/JSON output, run manifests, checkpoints and optional SVG plots."""

import csv
import io
import json
import os
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__

MANIFEST = "manifest.json"


def atomic_write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def csv_text(columns, meta):
    """CSV with '#'-prefixed metadata lines (units, frame, manifest)."""
    buf = io.StringIO()
    for key, val in meta.items():
        buf.write(f"# {key}: {val}\n")
    names = list(columns)
    cols = [np.atleast_1d(np.asarray(columns[k])) for k in names]
    n = max(c.shape[0] for c in cols)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names)
    for i in range(n):
        w.writerow([_fmt(c[i]) if i < c.shape[0] else "" for c in cols])
    return buf.getvalue()


def read_csv(path):
    """Columns of a CSV written by csv_text (metadata lines skipped)."""
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    head, body = rows[0], rows[1:]
    out = {}
    for j, name in enumerate(head):
        vals = [r[j] for r in body if j < len(r) and r[j] != ""]
        try:
            out[name] = np.array([float(v) for v in vals])
        except ValueError:
            out[name] = np.array(vals)
    return out


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"not serializable: {type(o)}")


def json_text(obj):
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


@dataclass
class RunContext:
    """Output directory plus the manifest being built for one run."""

    out_dir: Path
    recipe: str
    config_hash: str
    config: dict
    formats: tuple = ("csv", "json")
    checkpoint_interval: float = 600.0
    files: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    t0: float = field(default_factory=time.perf_counter)

    def __post_init__(self):
        self.out_dir = Path(self.out_dir)

    def meta(self, units, frame="laser", **extra):
        m = {"recipe": self.recipe, "units": units, "frame": frame,
             "manifest": MANIFEST, "config_hash": self.config_hash, "version": __version__}
        m.update(extra)
        return m

    def write_csv(self, name, columns, units, frame="laser", **extra):
        path = atomic_write(self.out_dir / name, csv_text(columns, self.meta(units, frame, **extra)))
        self.files.append(path.name)
        return path

    def write_json(self, name, obj):
        rec = {"manifest": MANIFEST, "config_hash": self.config_hash, "data": obj}
        path = atomic_write(self.out_dir / name, json_text(rec))
        self.files.append(path.name)
        return path

    def stage(self, name):
        return _Stage(self, name)

    def warn(self, msg):
        self.warnings.append(str(msg))

    def write_manifest(self, status="ok", error=None):
        man = {"recipe": self.recipe, "config_hash": self.config_hash, "version": __version__,
               "status": status, "wall_time": time.perf_counter() - self.t0,
               "timings": self.timings, "warnings": self.warnings, "files": sorted(self.files),
               "config": self.config}
        if error is not None:
            man["error"] = error
        atomic_write(self.out_dir / MANIFEST, json_text(man))
        return man


class _Stage:
    def __init__(self, ctx, name):
        self.ctx, self.name = ctx, name

    def __enter__(self):
        self.t = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.ctx.timings[self.name] = self.ctx.timings.get(self.name, 0.0) + time.perf_counter() - self.t
        return False


class Checkpoint:
    """Completed sweep points, flushed at most every ``interval`` seconds.

    Keyed by config hash, so a rerun of the same config resumes from the
    stored points and a changed config starts fresh.
    """

    def __init__(self, ctx, name="checkpoint.json", interval=None):
        self.path = ctx.out_dir / name
        self.hash = ctx.config_hash
        self.interval = ctx.checkpoint_interval if interval is None else interval
        self.last = time.monotonic()
        self.points = {}
        if self.path.exists():
            try:
                data = json.loads(self.path.read_text())
                if data.get("config_hash") == self.hash:
                    self.points = data.get("points", {})
            except (OSError, ValueError):
                pass

    def get(self, key):
        return self.points.get(str(key))

    def put(self, key, value):
        self.points[str(key)] = value
        if time.monotonic() - self.last >= self.interval:
            self.flush()

    def flush(self):
        atomic_write(self.path, json_text({"config_hash": self.hash, "points": self.points}))
        self.last = time.monotonic()

    def clear(self):
        if self.path.exists():
            self.path.unlink()


def svg_plot(path, x, ys, xlabel, ylabel, labels=None, logx=False, logy=False, heatmap=None):
    """Render a line plot (or a heatmap) to SVG. Returns False when plotting is unavailable."""
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except Exception:
        return False
    try:
        fig, ax = plt.subplots(figsize=(5, 3.5))
        if heatmap is not None:
            ext = heatmap.get("extent")
            im = ax.imshow(np.asarray(heatmap["z"]).T, origin="lower", aspect="auto", extent=ext)
            fig.colorbar(im, ax=ax)
        else:
            ys = [ys] if np.ndim(ys[0]) == 0 else ys
            for k, y in enumerate(ys):
                ax.plot(x, y, label=None if labels is None else labels[k])
            if labels is not None:
                ax.legend()
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if logx:
            ax.set_xscale("log")
        if logy:
            ax.set_yscale("log")
        fig.tight_layout()
        buf = io.StringIO()
        fig.savefig(buf, format="svg")
        plt.close(fig)
        atomic_write(path, buf.getvalue())
        return True
    except Exception:
        return False
