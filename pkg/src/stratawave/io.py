"""Persisted run outputs: CSV tables, JSON reports, run manifests, and the
STWV binary container for flattened states.

Container layout (all little-endian):

    bytes 0..3   magic "STWV"
    u32          format version (1)
    u32 n, u32 dim_h, u32 N, u32 m
    f64 L
    f64 a[m]                 interface heights
    u32 degrees[m]           per-layer polynomial degrees
    complex64 eta[m][nlat]
    complex64 p[l][nlat][degrees[l]+1]      for l = 0..m-1
    complex64 u[l][n][nlat][degrees[l]+1]   for l = 0..m-1

Numeric CSV fields are printed at 17 significant digits so reruns with an
identical manifest reproduce the files byte for byte.
"""

from __future__ import annotations

import csv
import hashlib
import json
import struct
import sys

import numpy as np

MAGIC = b"STWV"
VERSION = 1


def fmt(x) -> str:
    return f"{float(x):.17g}"


def write_table(path, header, rows):
    """CSV with one header line; every numeric cell at 17 significant digits."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([c if isinstance(c, str) else fmt(c) for c in row])


def read_table(path):
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        return header, [row for row in r]


def write_json(path, obj):
    def default(o):
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        if isinstance(o, np.ndarray):
            return o.tolist()
        raise TypeError(type(o).__name__)

    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=default)
        fh.write("\n")


def write_manifest(path, run_config, command: str, extra: dict | None = None):
    from . import __version__
    import scipy

    obj = {
        "command": command,
        "config_digest": run_config.digest(),
        "seed": run_config.seed,
        "versions": {
            "stratawave": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": sys.version.split()[0],
        },
    }
    if extra:
        obj.update(extra)
    write_json(path, obj)


# ----------------------------------------------------------------------------
# STWV state container
# ----------------------------------------------------------------------------

def write_state(path, state):
    grid, mesh = state.p.grid, state.p.mesh
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<5I", VERSION, grid.n, grid.dim_h, grid.N, mesh.m))
        fh.write(struct.pack("<d", grid.L))
        fh.write(struct.pack(f"<{mesh.m}d", *mesh.a[1:]))
        fh.write(struct.pack(f"<{mesh.m}I", *mesh.degrees))
        np.ascontiguousarray(state.eta, dtype=np.complex64).tofile(fh)
        for l in range(mesh.m):
            np.ascontiguousarray(state.p.data[l][0],
                                 dtype=np.complex64).tofile(fh)
        for l in range(mesh.m):
            np.ascontiguousarray(state.u.data[l],
                                 dtype=np.complex64).tofile(fh)


def read_state(path):
    """Read an STWV container back into a FlatState (on a fresh grid/mesh)."""
    from .grid import LayerMesh, TorusGrid
    from .linear import FlatState

    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise ValueError("not an STWV container")
        version, n, dim_h, N, m = struct.unpack("<5I", fh.read(20))
        if version != VERSION:
            raise ValueError(f"unsupported STWV version {version}")
        (L,) = struct.unpack("<d", fh.read(8))
        a = list(struct.unpack(f"<{m}d", fh.read(8 * m)))
        degrees = list(struct.unpack(f"<{m}I", fh.read(4 * m)))
        grid = TorusGrid(n=n, L=L, N=N)
        mesh = LayerMesh(a, degrees)
        state = FlatState.zeros(grid, mesh)
        nlat = grid.nlat
        state.eta = np.fromfile(fh, np.complex64, m * nlat).reshape(
            m, nlat).astype(complex)
        for l in range(m):
            d1 = degrees[l] + 1
            state.p.data[l][0] = np.fromfile(
                fh, np.complex64, nlat * d1).reshape(nlat, d1).astype(complex)
        for l in range(m):
            d1 = degrees[l] + 1
            state.u.data[l] = np.fromfile(
                fh, np.complex64, n * nlat * d1).reshape(n, nlat, d1).astype(complex)
    return state


# ----------------------------------------------------------------------------
# CSV schemas for linear data tuples
# ----------------------------------------------------------------------------

def write_volume_field(path, fld):
    """Schema: layer,comp,node,k...,re,im (lattice wavenumber columns)."""
    grid = fld.grid
    kcols = [f"k{d+1}" for d in range(grid.dim_h)]
    rows = []
    for l, block in enumerate(fld.data):
        nz = np.argwhere(np.abs(block) > 0)
        for comp, idx, node in nz:
            rows.append([str(l), str(comp), str(node)]
                        + [str(int(grid.k[idx, d])) for d in range(grid.dim_h)]
                        + [block[comp, idx, node].real,
                           block[comp, idx, node].imag])
    write_table(path, ["layer", "comp", "node"] + kcols + ["re", "im"], rows)


def read_volume_field(path, grid, mesh, ncomp):
    from .grid import SpectralField

    fld = SpectralField.zeros(grid, mesh, ncomp)
    _, rows = read_table(path)
    lut = _lattice_lookup(grid)
    for row in rows:
        l, comp, node = int(row[0]), int(row[1]), int(row[2])
        kk = tuple(int(v) for v in row[3:3 + grid.dim_h])
        re, im = float(row[-2]), float(row[-1])
        fld.data[l][comp, lut[kk], node] = re + 1j * im
    return fld


def write_interface_field(path, arr, grid, comp_axis: bool):
    """Schema: interface[,comp],k...,re,im for (m[,n],nlat) coefficients."""
    kcols = [f"k{d+1}" for d in range(grid.dim_h)]
    rows = []
    nz = np.argwhere(np.abs(arr) > 0)
    for entry in nz:
        idx = entry[-1]
        pre = [str(v) for v in entry[:-1]]
        rows.append(pre + [str(int(grid.k[idx, d])) for d in range(grid.dim_h)]
                    + [arr[tuple(entry)].real, arr[tuple(entry)].imag])
    header = (["interface", "comp"] if comp_axis else ["interface"]) \
        + kcols + ["re", "im"]
    write_table(path, header, rows)


def read_interface_field(path, grid, shape):
    arr = np.zeros(shape, complex)
    _, rows = read_table(path)
    lut = _lattice_lookup(grid)
    npre = len(shape) - 1
    for row in rows:
        pre = tuple(int(v) for v in row[:npre])
        kk = tuple(int(v) for v in row[npre:npre + grid.dim_h])
        arr[pre + (lut[kk],)] = float(row[-2]) + 1j * float(row[-1])
    return arr


def _lattice_lookup(grid):
    return {tuple(int(v) for v in grid.k[i]): i for i in range(grid.nlat)}


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        h.update(fh.read())
    return h.hexdigest()
