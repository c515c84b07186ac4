#!/usr/bin/env python3
"""Regenerate the bundled desk images and meshes under data/.

Images come from scikit-image's bundled sample photos (public domain / CC0),
center-cropped to a square and downsampled to 64x64 with antialiasing.
"""
import math
import pathlib

import numpy as np
from PIL import Image
import skimage.data

ROOT = pathlib.Path(__file__).resolve().parent.parent
SIZE = 64


def save_image(name, arr):
    h, w = arr.shape[:2]
    s = min(h, w)
    top, left = (h - s) // 2, (w - s) // 2
    crop = Image.fromarray(arr[top:top + s, left:left + s, :3])
    crop = crop.resize((SIZE, SIZE), Image.LANCZOS)
    crop.save(ROOT / "data" / "images" / f"{name}.png")


def write_obj(name, verts, faces, comment):
    lines = [f"# {comment}"]
    lines += [f"v {x:.9f} {y:.9f} {z:.9f}" for x, y, z in verts]
    lines += ["f " + " ".join(str(i + 1) for i in f) for f in faces]
    (ROOT / "data" / "meshes" / f"{name}.obj").write_text("\n".join(lines) + "\n")


def cube():
    verts = [(x, y, z) for x in (0, 1) for y in (0, 1) for z in (0, 1)]
    idx = {v: i for i, v in enumerate(verts)}
    quads = [
        [(0, 0, 0), (0, 1, 0), (1, 1, 0), (1, 0, 0)],
        [(0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1)],
        [(0, 0, 0), (1, 0, 0), (1, 0, 1), (0, 0, 1)],
        [(0, 1, 0), (0, 1, 1), (1, 1, 1), (1, 1, 0)],
        [(0, 0, 0), (0, 0, 1), (0, 1, 1), (0, 1, 0)],
        [(1, 0, 0), (1, 1, 0), (1, 1, 1), (1, 0, 1)],
    ]
    return verts, [[idx[c] for c in q] for q in quads]


def rotated(verts, yaw, pitch):
    cy, sy, cp, sp = math.cos(yaw), math.sin(yaw), math.cos(pitch), math.sin(pitch)
    out = []
    for x, y, z in verts:
        x, y = cy * x - sy * y, sy * x + cy * y
        y, z = cp * y - sp * z, sp * y + cp * z
        out.append((x, y, z))
    return out


def icosphere(subdivisions):
    t = (1 + 5 ** 0.5) / 2
    verts = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
             (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
             (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    verts = [tuple(c / math.sqrt(sum(x * x for x in v)) for c in v) for v in verts]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
             (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
             (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
             (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    for _ in range(subdivisions):
        cache = {}

        def mid(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = [(p + q) / 2 for p, q in zip(verts[a], verts[b])]
                n = math.sqrt(sum(c * c for c in m))
                verts.append(tuple(c / n for c in m))
                cache[key] = len(verts) - 1
            return cache[key]

        nf = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            nf += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = nf
    return verts, faces


def torus(major=1.0, minor=0.4, nu=32, nv=16):
    verts = []
    for i in range(nu):
        u = 2 * math.pi * i / nu
        for j in range(nv):
            v = 2 * math.pi * j / nv
            r = major + minor * math.cos(v)
            verts.append((r * math.cos(u), r * math.sin(u), minor * math.sin(v)))
    faces = []
    for i in range(nu):
        for j in range(nv):
            a = i * nv + j
            b = ((i + 1) % nu) * nv + j
            c = ((i + 1) % nu) * nv + (j + 1) % nv
            d = i * nv + (j + 1) % nv
            faces += [(a, b, c), (a, c, d)]
    return verts, faces


if __name__ == "__main__":
    (ROOT / "data" / "images").mkdir(parents=True, exist_ok=True)
    (ROOT / "data" / "meshes").mkdir(parents=True, exist_ok=True)
    save_image("cat", skimage.data.chelsea())
    save_image("coffee", skimage.data.coffee())
    save_image("astronaut", skimage.data.astronaut())
    write_obj("cube", *cube(), "axis-aligned unit cube, quad faces")
    # An axis-aligned cube fills its own bounding box, so every occupancy
    # sample would be inside; the training suite uses a tilted copy.
    verts, faces = cube()
    write_obj("cube_tilted", rotated(verts, math.radians(45), math.radians(35.264)), faces,
              "unit cube rotated 45 deg about z then 35.264 deg about x, quad faces")
    write_obj("icosphere", *icosphere(2), "unit icosphere, 2 subdivisions")
    write_obj("torus", *torus(), "torus R=1 r=0.4, 32x16 segments")
