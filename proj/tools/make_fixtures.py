#!/usr/bin/env python3
"""Writes the format fixture corpus used by the acceptance run.

Each MRC fixture gets a sidecar NAME.values holding the voxel values as
little-endian float32 in x-fastest order, written independently of the
library so round trips can be checked bit for bit.
"""
import math
import struct
import sys
from pathlib import Path

import numpy as np


def mrc_bytes(vol_xyz, spacing, mapcrs=(1, 2, 3), origin=(0.0, 0.0, 0.0), nstart=(0, 0, 0), nsymbt=0,
              big_endian=False):
    e = ">" if big_endian else "<"
    # File axes: column, row, section = the map axes listed in mapcrs.
    file_axes = [m - 1 for m in mapcrs]
    # vol_xyz is indexed [x, y, z]; arrange into [s, r, c] for C-order output.
    data = np.transpose(vol_xyz, axes=(file_axes[2], file_axes[1], file_axes[0]))
    n = [vol_xyz.shape[a] for a in file_axes]
    h = bytearray(1024)
    struct.pack_into(e + "3i", h, 0, *n)
    struct.pack_into(e + "i", h, 12, 2)
    struct.pack_into(e + "3i", h, 16, *nstart)
    struct.pack_into(e + "3i", h, 28, *vol_xyz.shape)
    struct.pack_into(e + "3f", h, 40, *[vol_xyz.shape[a] * spacing[a] for a in range(3)])
    struct.pack_into(e + "3f", h, 52, 90.0, 90.0, 90.0)
    struct.pack_into(e + "3i", h, 64, *mapcrs)
    struct.pack_into(e + "3f", h, 76, float(vol_xyz.min()), float(vol_xyz.max()), float(vol_xyz.mean()))
    struct.pack_into(e + "i", h, 92, nsymbt)
    struct.pack_into(e + "3f", h, 196, *origin)
    h[208:212] = b"MAP "
    h[212:216] = bytes([0x11, 0x11, 0, 0]) if big_endian else bytes([0x44, 0x44, 0, 0])
    payload = data.astype(e + "f4").tobytes(order="C")
    return bytes(h) + bytes(nsymbt) + payload


def write_mrc_fixture(out, name, vol, **kw):
    (out / f"{name}.mrc").write_bytes(mrc_bytes(vol, **kw))
    (out / f"{name}.values").write_bytes(np.transpose(vol, (2, 1, 0)).astype("<f4").tobytes(order="C"))


def pdb_line(rec, serial, name, alt, res, chain, seq, x, y, z, elem):
    name_col = f" {name:<3}" if len(name) < 4 else name
    return (f"{rec:<6}{serial:>5} {name_col}{alt}{res:>3} {chain}{seq:>4}    "
            f"{x:>8.3f}{y:>8.3f}{z:>8.3f}{1.0:>6.2f}{20.0:>6.2f}          {elem:>2}\n")


def helix(n, start=(0.0, 0.0, 0.0), phase=0.0):
    pts = []
    for i in range(n):
        t = phase + i * 100.0 * math.pi / 180.0
        pts.append((start[0] + 2.3 * math.cos(t), start[1] + 2.3 * math.sin(t), start[2] + 1.5 * i))
    return pts


RES = ["ALA", "GLY", "SER", "LEU", "LYS", "GLU", "TRP", "PHE", "VAL", "ASP"]


def backbone_records(rec_list, chain, pts, first_seq, serial, resnames=None):
    for i, (x, y, z) in enumerate(pts):
        res = resnames[i] if resnames else RES[i % len(RES)]
        for name, (dx, dy, dz), elem in (("N", (-0.5, 1.2, -0.3), "N"), ("CA", (0, 0, 0), "C"),
                                         ("C", (1.2, 0.6, 0.4), "C"), ("O", (1.4, 1.7, 0.9), "O")):
            rec_list.append(pdb_line("ATOM", serial, name, " ", res, chain, first_seq + i, x + dx, y + dy, z + dz, elem))
            serial += 1
    return serial


def main(out):
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(20240)

    write_mrc_fixture(out, "map_plain", rng.normal(size=(8, 9, 10)).astype(np.float32), spacing=(1.0, 1.0, 1.0))
    write_mrc_fixture(out, "map_permuted", rng.uniform(0, 1, size=(6, 7, 5)).astype(np.float32),
                      spacing=(0.8, 1.1, 1.3), mapcrs=(3, 1, 2), origin=(-4.0, 2.5, 10.0))
    write_mrc_fixture(out, "map_nstart", rng.uniform(-2, 3, size=(5, 5, 12)).astype(np.float32),
                      spacing=(1.5, 1.5, 1.5), nstart=(-3, 4, 7))
    write_mrc_fixture(out, "map_extheader", (rng.normal(size=(10, 4, 6)) * 1e-3).astype(np.float32),
                      spacing=(0.5, 0.5, 0.5), mapcrs=(2, 3, 1), nsymbt=160)
    write_mrc_fixture(out, "map_bigendian", rng.exponential(size=(7, 6, 9)).astype(np.float32),
                      spacing=(1.2, 1.0, 0.9), origin=(100.25, -50.5, 3.0), big_endian=True)

    lines = []
    backbone_records(lines, "A", helix(12), 1, 1)
    (out / "single_helix.pdb").write_text("".join(lines) + "TER\nEND\n")

    lines = []
    s = backbone_records(lines, "A", helix(8), 5, 1)
    lines.append("TER\n")
    backbone_records(lines, "B", helix(10, (15.0, -7.0, 3.0), 0.4), 101, s)
    (out / "two_chains.pdb").write_text("".join(lines) + "TER\nEND\n")

    lines = ["HEADER    FIXTURE WITH HETEROGENS\n"]
    s = backbone_records(lines, "A", helix(6), 1, 1, ["MET", "ALA", "GLY", "SER", "LEU", "LYS"])
    for i, (x, y, z) in enumerate(helix(2, (3.0, 3.0, 9.0))):
        for name, d, elem in (("N", -0.5, "N"), ("CA", 0.0, "C"), ("C", 0.7, "C"), ("O", 1.3, "O"), ("SE", 2.1, "SE")):
            lines.append(pdb_line("HETATM", s, name, " ", "MSE", "A", 7 + i, x + d, y, z - d, elem))
            s += 1
    lines.append(pdb_line("HETATM", s, "O", " ", "HOH", "A", 201, 9.0, 9.0, 9.0, "O"))
    (out / "hetero.pdb").write_text("".join(lines) + "TER\nEND\n")

    lines = []
    for i, (x, y, z) in enumerate(helix(5)):
        lines.append(pdb_line("ATOM", 2 * i + 1, "CA", "A", "SER", "C", 10 + i, x, y, z, "C"))
        lines.append(pdb_line("ATOM", 2 * i + 2, "CA", "B", "SER", "C", 10 + i, x + 0.4, y, z, "C"))
    (out / "altloc.pdb").write_text("".join(lines) + "TER\nEND\n")

    lines = []
    pts = [(-999.0 + 3.8 * i, 9990.123 - 2.1 * i, -0.001 * i) for i in range(6)]
    backbone_records(lines, "Z", pts, -3, 1)
    (out / "extreme_coords.pdb").write_text("".join(lines) + "TER\nEND\n")


if __name__ == "__main__":
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "tests" / "data" / "corpus")
