"""Deterministic execution helpers: worker pool, CSV output, run manifest."""

import hashlib
import json
import multiprocessing
import os
import time

import numpy as np

from .constants import constants_record
from .errors import CasiliftError


class TaskError(CasiliftError):
    """A worker task failed; carries the task's physical context."""

    def __init__(self, message, context):
        super().__init__(f"{message} [{context}]")
        self.context = context


def parallel_map(fn, tasks, workers):
    """Map fn over tasks preserving order; results are identical to the
    sequential execution regardless of worker count."""
    tasks = list(tasks)
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if not tasks:
        return []
    if workers == 1 or len(tasks) == 1:
        return [fn(t) for t in tasks]
    with multiprocessing.Pool(processes=min(workers, len(tasks))) as pool:
        return pool.map(fn, tasks, chunksize=1)


def format_float(x):
    """Full double precision, round-trip safe, '.' decimal separator."""
    return repr(float(x))


def write_csv(path, header, rows):
    """One header line, full-precision numeric cells; returns sha256 hex."""
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            cells = []
            for cell in row:
                if isinstance(cell, str):
                    cells.append(cell)
                elif isinstance(cell, (int, np.integer)):
                    cells.append(str(int(cell)))
                else:
                    cells.append(format_float(cell))
            fh.write(",".join(cells) + "\n")
    return sha256_file(path)


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            h.update(block)
    return h.hexdigest()


class Manifest:
    """Reproducibility record written next to the CSV outputs."""

    def __init__(self, config, command, version):
        self.t0 = time.time()
        self.doc = {
            "artifact": "casilift",
            "version": version,
            "command": command,
            "config_path": config.path,
            "config_sha256": hashlib.sha256(config.raw_bytes).hexdigest(),
            "constants": constants_record(),
            "outputs": {},
            "metadata": {},
        }
        if config.fluid_liquid_range is not None:
            self.doc["metadata"]["fluid_liquid_range_K"] = list(config.fluid_liquid_range)

    def add_output(self, path, checksum):
        self.doc["outputs"][os.path.basename(path)] = checksum

    def add_metadata(self, key, value):
        self.doc["metadata"][key] = value

    def write(self, out_dir):
        self.doc["wall_time_s"] = round(time.time() - self.t0, 3)
        path = os.path.join(out_dir, "manifest.json")
        with open(path, "w") as fh:
            json.dump(self.doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path
