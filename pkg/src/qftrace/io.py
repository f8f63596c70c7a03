"""Orbit cache files and small CSV/JSON helpers."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .groups import Orbit

FORMAT_VERSION = 1
TOOL_VERSION = "0.1.0"


def _header(orbit: Orbit) -> dict:
    return {
        "format": "qftrace.orbit",
        "format_version": FORMAT_VERSION,
        "tool_version": TOOL_VERSION,
        "label": orbit.label,
        "max_len": int(orbit.max_len),
        "prune": None if orbit.prune is None else float(orbit.prune),
        "n_elements": len(orbit),
        "meta": {k: v for k, v in orbit.meta.items() if isinstance(v, (int, float, str, bool))},
    }


def save_orbit(path, orbit: Orbit) -> Path:
    """Write an orbit cache.

    ``.json`` gives one record {word, matrix (8 floats), norm_sq, g21_abs}
    per element and suits small orbits; anything else is a compressed npz
    holding the same header and the column arrays (words are recovered from
    parent/letter).
    """
    path = Path(path)
    head = _header(orbit)
    if path.suffix == ".json":
        recs = []
        for i in range(len(orbit)):
            m = orbit.matrices[i]
            recs.append(
                {
                    "word": list(orbit.word(i)),
                    "matrix": [float(x) for z in m.ravel() for x in (z.real, z.imag)],
                    "norm_sq": float(orbit.norm_sq[i]),
                    "g21_abs": float(orbit.g21_abs[i]),
                }
            )
        with open(path, "w") as fh:
            json.dump({"header": head, "elements": recs}, fh)
        return path
    with open(path, "wb") as fh:
        np.savez_compressed(
            fh,
            header=np.array(json.dumps(head, sort_keys=True)),
            matrices=orbit.matrices,
            parent=orbit.parent,
            letter=orbit.letter,
            length=orbit.length,
            norm_sq=orbit.norm_sq,
            g21_abs=orbit.g21_abs,
        )
    return path


def _check_header(head: dict):
    if head.get("format") != "qftrace.orbit" or head.get("format_version") != FORMAT_VERSION:
        raise ValidationError(f"not a version {FORMAT_VERSION} orbit cache")


def load_orbit(path) -> Orbit:
    path = Path(path)
    if path.suffix == ".json":
        with open(path) as fh:
            d = json.load(fh)
        head = d["header"]
        _check_header(head)
        recs = d["elements"]
        words = [tuple(r["word"]) for r in recs]
        index = {w: i for i, w in enumerate(words)}
        mats = np.array([np.array(r["matrix"]).view(complex).reshape(2, 2) for r in recs])
        parent = np.array([index[w[:-1]] if w else -1 for w in words], dtype=np.int64)
        letter = np.array([w[-1] if w else -1 for w in words], dtype=np.int64)
        length = np.array([len(w) for w in words], dtype=np.int64)
        norm_sq = np.array([r["norm_sq"] for r in recs])
        g21 = np.array([r["g21_abs"] for r in recs])
    else:
        with np.load(path) as z:
            head = json.loads(str(z["header"]))
            _check_header(head)
            mats, parent, letter = z["matrices"], z["parent"], z["letter"]
            length, norm_sq, g21 = z["length"], z["norm_sq"], z["g21_abs"]
    return Orbit(head["label"], head["max_len"], head["prune"], mats, parent, letter, length, norm_sq, g21, head["meta"])


def write_columns_csv(path, header, *columns):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for row in zip(*columns):
            wr.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])


def read_columns_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def write_json(path, obj):
    """Deterministic JSON: sorted keys, fixed indentation, trailing newline."""
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)
