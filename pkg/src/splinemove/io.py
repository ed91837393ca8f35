"""Geometry export: sampled VTK meshes and lossless control-net CSV files."""
from __future__ import annotations

import csv
import json
import os
from pathlib import Path

import numpy as np

from .errors import ArgumentError
from .spline.knots import KnotVector
from .spline.multipatch import Interface, MultiPatchDomain
from .spline.patch import TensorPatch

VTK_QUAD = 9


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def sample_lattice(patch: TensorPatch, m: int):
    """Points and scaled Jacobians on an ``m x m`` lattice, ``xi_1`` fastest."""
    u = np.linspace(0.0, 1.0, m)
    R, (D1, D2) = patch.tabulate((u, u))
    X = R @ patch.ctrl
    J = np.stack([D1 @ patch.ctrl, D2 @ patch.ctrl], axis=-1)
    det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
    norms = np.linalg.norm(J[:, :, 0], axis=1) * np.linalg.norm(J[:, :, 1], axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        sj = np.where(norms > 0, det / norms, 0.0)
    return X, sj


def write_vtk(domain: MultiPatchDomain, path, m: int = 17, title: str = "splinemove") -> Path:
    """Legacy ASCII unstructured grid of quads from an ``m x m`` lattice per patch.

    Points are not merged across interfaces, so the file has
    ``len(domain) * m**2`` points and ``len(domain) * (m - 1)**2`` cells.
    Point data carries the scaled Jacobian, cell data the patch index.
    """
    if domain.pdim != 2:
        raise ArgumentError("VTK export is implemented for planar domains")
    if m < 2:
        raise ArgumentError("sample lattice needs m >= 2")
    pts, sjs, cells, owner = [], [], [], []
    i = np.arange(m - 1)
    a = (i[None, :] + m * i[:, None]).ravel()  # lower-left corner of each cell
    quad = np.stack([a, a + 1, a + 1 + m, a + m], axis=1)
    for k, p in enumerate(domain.patches):
        X, sj = sample_lattice(p, m)
        if X.shape[1] == 2:
            X = np.c_[X, np.zeros(len(X))]
        cells.append(quad + k * m * m)
        owner.append(np.full(len(quad), k))
        pts.append(X)
        sjs.append(sj)
    pts, sjs = np.vstack(pts), np.concatenate(sjs)
    cells, owner = np.vstack(cells), np.concatenate(owner)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["# vtk DataFile Version 3.0", title[:255], "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {len(pts)} double"]
    lines += [" ".join(_fmt(c) for c in row) for row in pts]
    lines.append(f"CELLS {len(cells)} {5 * len(cells)}")
    lines += ["4 " + " ".join(str(int(c)) for c in row) for row in cells]
    lines.append(f"CELL_TYPES {len(cells)}")
    lines += [str(VTK_QUAD)] * len(cells)
    lines += [f"CELL_DATA {len(cells)}", "SCALARS patch int 1", "LOOKUP_TABLE default"]
    lines += [str(int(o)) for o in owner]
    lines += [f"POINT_DATA {len(pts)}", "SCALARS scaled_jacobian double 1", "LOOKUP_TABLE default"]
    lines += [_fmt(v) for v in sjs]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_vtk_counts(path) -> dict:
    """Point and cell counts of a legacy VTK file (a minimal reader for checks)."""
    out = {}
    with open(path) as f:
        for line in f:
            head = line.split()
            if head and head[0] in ("POINTS", "CELLS", "CELL_TYPES"):
                out[head[0].lower()] = int(head[1])
    return out


def write_control_net(domain: MultiPatchDomain, path) -> Path:
    """CSV of all control points with a JSON header comment describing the spline spaces.

    Floats are written with 17 significant digits, enough to round-trip
    IEEE doubles exactly.
    """
    meta = {
        "patches": [{"degrees": [kv.degree for kv in p.kvs], "knots": [kv.knots.tolist() for kv in p.kvs],
                     "dim": p.dim, "rational": bool(p.is_rational)} for p in domain.patches],
        "interfaces": [[i.a, i.side_a, i.b, i.side_b, i.flip] for i in domain.interfaces],
        "flags": list(domain.flags),
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    dim = max(p.dim for p in domain.patches)
    with open(path, "w", newline="") as f:
        f.write("# " + json.dumps(meta, separators=(",", ":")) + "\n")
        w = csv.writer(f)
        w.writerow(["patch", "index"] + ["xyz"[d] for d in range(dim)] + ["weight"])
        for k, p in enumerate(domain.patches):
            for i, (x, wt) in enumerate(zip(p.ctrl, p.weights)):
                w.writerow([k, i] + [_fmt(c) for c in x] + [_fmt(wt)])
    return path


def read_control_net(path) -> MultiPatchDomain:
    with open(path, newline="") as f:
        first = f.readline()
        if not first.startswith("# "):
            raise ArgumentError(f"{path}: missing JSON header line")
        meta = json.loads(first[2:])
        rows = list(csv.reader(f))[1:]
    ctrl = [[] for _ in meta["patches"]]
    wts = [[] for _ in meta["patches"]]
    for r in rows:
        k = int(r[0])
        dim = meta["patches"][k]["dim"]
        ctrl[k].append([float(v) for v in r[2:2 + dim]])
        wts[k].append(float(r[-1]))
    patches = []
    for k, pm in enumerate(meta["patches"]):
        kvs = tuple(KnotVector(d, t) for d, t in zip(pm["degrees"], pm["knots"]))
        patches.append(TensorPatch(kvs, np.array(ctrl[k]), np.array(wts[k]) if pm["rational"] else None))
    itf = tuple(Interface(a, sa, b, sb, bool(fl)) for a, sa, b, sb, fl in meta["interfaces"])
    return MultiPatchDomain(tuple(patches), itf, tuple(meta["flags"]))


def numbered(directory, stem: str, step: int, ext: str) -> Path:
    return Path(directory) / f"{stem}_{step:04d}.{ext}"


def export_step(domain: MultiPatchDomain, directory, step: int, m: int = 17, stem: str = "domain") -> list:
    """Both artifacts for one step: ``stem_NNNN.vtk`` and ``stem_NNNN.csv``."""
    os.makedirs(directory, exist_ok=True)
    return [write_vtk(domain, numbered(directory, stem, step, "vtk"), m),
            write_control_net(domain, numbered(directory, stem, step, "csv"))]


__all__ = ["write_vtk", "read_vtk_counts", "write_control_net", "read_control_net", "export_step",
           "sample_lattice"]
