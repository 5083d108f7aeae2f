"""CSV tables and JSON run manifests.

Floats are written with ``repr`` so a re-run from the same manifest
reproduces the files byte for byte.
"""
from __future__ import annotations

import csv
import io
import json
from typing import Iterable, Mapping

from .lattice import LatticeSpec

ESTIMATE_HEADER = ["observable", "mean_re", "mean_im", "stderr", "n"]
DECAY_HEADER = ["direction", "exponent"]
SCALING_HEADER = ["kernel", "estimate"]


def csv_text(header: list, rows: Iterable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def estimates_csv(estimates: Mapping) -> str:
    """``{observable: Estimate}`` in insertion order."""
    return csv_text(ESTIMATE_HEADER, (e.row(name) for name, e in estimates.items()))


def decay_csv(rows) -> str:
    return csv_text(DECAY_HEADER, (r.row() for r in rows))


def scaling_csv(results) -> str:
    return csv_text(SCALING_HEADER, (r.row() for r in results))


def manifest(command: str, config: Mapping, spec: LatticeSpec | None = None, seed: int | None = None,
             outputs: Iterable[str] = ()) -> str:
    """Deterministic JSON manifest echoing the resolved configuration."""
    data = {"command": command, "config": dict(config), "seed": seed, "outputs": sorted(outputs)}
    if spec is not None:
        data["lattice"] = spec.to_dict()
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


__all__ = ["csv_text", "decay_csv", "estimates_csv", "manifest", "scaling_csv"]
