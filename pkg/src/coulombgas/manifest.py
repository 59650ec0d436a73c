"""Result manifests and columnar output.

Tables are comma-separated with a header row; floats are written with
``%.17g`` so they round-trip exactly. File names carry the command, the seed
and the configuration hash.
"""

import csv
import hashlib
import io
import json
import math
import os
import time
from dataclasses import dataclass, field

from . import __version__

FORMAT = "coulombgas-manifest"


def _cell(v):
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return "%.17g" % v
    if isinstance(v, complex):
        return "%.17g%+.17gj" % (v.real, v.imag)
    return str(v)


def table_text(rows, columns=None):
    """CSV text for a list of dict rows with a fixed column order."""
    if columns is None:
        columns = list(rows[0]) if rows else []
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r.get(c, "")) for c in columns])
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if hasattr(v, "tolist"):
        return _jsonable(v.tolist())
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    if isinstance(v, complex):
        return [v.real, v.imag]
    return v


@dataclass
class ResultManifest:
    """Provenance record of one command run.

    ``outputs`` lists data files with their SHA-256 and a provenance tag;
    ``rng`` records the seed and the stream index of every task; ``status``
    is ``complete`` or ``failed`` (with ``failure`` filled in).
    """

    command: str
    config: dict
    config_hash: str
    seed: int
    out_dir: str
    outputs: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    rng: list = field(default_factory=list)
    status: str = "running"
    failure: dict = None
    started: float = field(default_factory=time.time)
    wall_clock: float = 0.0

    def stem(self, name):
        return f"{self.command}_{name}_seed{self.seed}_{self.config_hash}"

    def write_table(self, name, rows, columns=None, provenance="computed"):
        path = os.path.join(self.out_dir, self.stem(name) + ".csv")
        text = table_text(rows, columns)
        os.makedirs(self.out_dir, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        self.outputs.append({"file": os.path.basename(path), "sha256": hashlib.sha256(text.encode()).hexdigest(),
                             "rows": len(rows), "provenance": provenance})
        return path

    def record_stream(self, task, chain):
        self.rng.append({"task": task, "seed": self.seed, "stream": int(chain)})

    def finish(self, status="complete", failure=None):
        self.status = status
        self.failure = failure
        self.wall_clock = time.time() - self.started

    def to_dict(self):
        return {"format": FORMAT, "version": __version__, "command": self.command, "config": self.config,
                "config_hash": self.config_hash, "seed": self.seed, "status": self.status,
                "failure": self.failure, "outputs": self.outputs, "summary": _jsonable(self.summary),
                "rng": self.rng, "started": self.started, "wall_clock": self.wall_clock}

    @property
    def path(self):
        return os.path.join(self.out_dir, self.stem("manifest") + ".json")

    def save(self):
        os.makedirs(self.out_dir, exist_ok=True)
        with open(self.path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
        return self.path


def emit_report(manifest):
    """Write the JSON summary next to the tables; partial runs are marked INCOMPLETE."""
    state = "COMPLETE" if manifest.status == "complete" else "INCOMPLETE"
    doc = {"report": state, "command": manifest.command, "seed": manifest.seed,
           "config_hash": manifest.config_hash, "summary": _jsonable(manifest.summary),
           "files": [o["file"] for o in manifest.outputs]}
    if manifest.failure:
        doc["failure"] = manifest.failure
    path = os.path.join(manifest.out_dir, manifest.stem("summary") + ".json")
    os.makedirs(manifest.out_dir, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
    return path
