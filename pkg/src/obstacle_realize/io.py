"""File formats: OBJ for obstacle geometry plus a JSON sidecar, and JSON helpers.

OBJ coordinates are written with 17 significant digits so that every double
reads back bit for bit. Groups name the obstacle kind; each obstacle owns its
own vertices (no sharing), which keeps the reader a simple block parser.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .walls import ObstacleSet

FORMAT = "obstacle-realize/1"

_TET_FACES = ((0, 2, 1), (0, 1, 3), (1, 2, 3), (0, 3, 2))
_BOX_FACES = ((0, 2, 3, 1), (4, 5, 7, 6), (0, 1, 5, 4), (2, 6, 7, 3), (0, 4, 6, 2), (1, 3, 7, 5))
_FACES_PER = {"triangles": 1, "squares": 1, "tetrahedra": 4, "boxes": 6}


def _fmt(x):
    return format(float(x), ".17g")


def _box_corners(B):
    lo, hi = B[:, 0], B[:, 1]
    return np.stack([np.where(np.array([(c >> k) & 1 for k in range(3)], bool), hi, lo) for c in range(8)],
                    axis=1)


def to_jsonable(x):
    if isinstance(x, dict):
        return {str(k): to_jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [to_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return to_jsonable(x.tolist())
    if isinstance(x, np.generic):
        return x.item()
    return x


def save_json(obj, path):
    with open(path, "w") as fh:
        json.dump(to_jsonable(obj), fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_json(path):
    with open(path) as fh:
        return json.load(fh)


def sidecar_path(path):
    return Path(str(path) + ".json")


def save_obj(obs: ObstacleSet, path, sidecar=True):
    """Write obstacles as OBJ; meta and provenance go to ``<path>.json``."""
    lines = [f"# {FORMAT}", f"# triangles {len(obs.triangles)} squares {len(obs.squares)} "
             f"tetrahedra {len(obs.tetrahedra)} boxes {len(obs.boxes)}"]
    vcount = 0
    blocks = [("triangles", obs.triangles, ((0, 1, 2),)), ("squares", obs.squares, ((0, 1, 2, 3),)),
              ("tetrahedra", obs.tetrahedra, _TET_FACES),
              ("boxes", _box_corners(obs.boxes) if len(obs.boxes) else np.zeros((0, 8, 3)), _BOX_FACES)]
    for name, arr, faces in blocks:
        if not len(arr):
            continue
        lines.append(f"g {name}")
        k = arr.shape[1]
        vtx = [f"v {_fmt(a)} {_fmt(b)} {_fmt(c)}" for a, b, c in arr.reshape(-1, 3)]
        for o in range(len(arr)):
            lines.extend(vtx[o * k:(o + 1) * k])
            base = vcount + o * k + 1
            for f in faces:
                lines.append("f " + " ".join(str(base + i) for i in f))
        vcount += len(arr) * k
    Path(path).write_text("\n".join(lines) + "\n")
    if sidecar:
        save_json({"format": FORMAT, "meta": obs.meta, "provenance": obs.provenance,
                   "counts": {"triangles": len(obs.triangles), "squares": len(obs.squares),
                              "tetrahedra": len(obs.tetrahedra), "boxes": len(obs.boxes)}},
                  sidecar_path(path))


def load_obj(path, sidecar=True):
    """Read an OBJ written by :func:`save_obj` (or any triangle/quad OBJ)."""
    verts = []
    faces = {name: [] for name in _FACES_PER}
    group = None
    with open(path) as fh:
        for line in fh:
            if line.startswith("v "):
                verts.append([float(x) for x in line.split()[1:4]])
            elif line.startswith("g "):
                group = line.split()[1]
            elif line.startswith("f "):
                idx = [int(tok.split("/")[0]) - 1 for tok in line.split()[1:]]
                g = group if group in faces else ("triangles" if len(idx) == 3 else "squares")
                faces[g].append(idx)
    V = np.asarray(verts, float).reshape(-1, 3)
    out = {}
    for name in ("triangles", "squares"):
        f = faces[name]
        k = 3 if name == "triangles" else 4
        out[name] = V[np.asarray(f, int)].reshape(-1, k, 3) if f else np.zeros((0, k, 3))
    tets = []
    for o in range(0, len(faces["tetrahedra"]), 4):
        ids = sorted({i for f in faces["tetrahedra"][o:o + 4] for i in f})
        tets.append(V[ids])
    boxes = []
    for o in range(0, len(faces["boxes"]), 6):
        ids = sorted({i for f in faces["boxes"][o:o + 6] for i in f})
        c = V[ids]
        boxes.append([c.min(axis=0), c.max(axis=0)])
    meta, prov = {}, {}
    side = sidecar_path(path)
    if sidecar and side.exists():
        d = load_json(side)
        meta = {k: np.asarray(v) for k, v in d.get("meta", {}).items()}
        prov = d.get("provenance", {})
    return ObstacleSet(
        out["triangles"], out["squares"],
        np.asarray(tets, float).reshape(-1, 4, 3), np.asarray(boxes, float).reshape(-1, 2, 3),
        meta, prov,
    )


def save_points(points, path, labels=None):
    pts = np.atleast_2d(np.asarray(points, float))
    obj = {"points": pts.tolist()}
    if labels is not None:
        obj["labels"] = [str(x) for x in labels]
    save_json(obj, path)


def load_points(path):
    """Sites from JSON: a bare list, ``{"points": [...]}`` or an embedding file."""
    d = load_json(path)
    if isinstance(d, list):
        return np.asarray(d, float), None
    pts = d["points"]
    if isinstance(pts, dict):
        labels = list(pts)
        return np.asarray([pts[k] for k in labels], float), labels
    return np.asarray(pts, float), d.get("labels")


def write_tsv(path, header, rows):
    with open(path, "w") as fh:
        fh.write("\t".join(header) + "\n")
        for r in rows:
            fh.write("\t".join(_fmt(x) if isinstance(x, (float, np.floating)) else str(x) for x in r) + "\n")
