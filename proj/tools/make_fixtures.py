#!/usr/bin/env python3
"""Regenerates the small committed test fixtures in fixtures/."""

import json
import math
import pathlib

import numpy as np
from PIL import Image, ImageDraw, ImageFilter

OUT = pathlib.Path(__file__).resolve().parent.parent / "fixtures"


def star_polygon(cx, cy, r_out, r_in, points=5):
    pts = []
    for i in range(2 * points):
        r = r_out if i % 2 == 0 else r_in
        a = -math.pi / 2 + i * math.pi / points
        pts.append((round(cx + r * math.cos(a), 2), round(cy + r * math.sin(a), 2)))
    return pts


def save_polygons(name, polys):
    flat = [[v for p in poly for v in p] for poly in polys]
    (OUT / name).write_text(json.dumps({"polygons": flat}, indent=1) + "\n")


def starfish(rng):
    w, h = 96, 80
    poly = star_polygon(48, 42, 36, 15)
    yy, xx = np.mgrid[0:h, 0:w]
    rgb = np.stack([
        0.85 + 0.1 * np.sin(xx / 3.0),
        0.45 + 0.15 * np.cos(yy / 4.0),
        0.2 + 0.05 * rng.standard_normal((h, w)),
    ], axis=-1)
    alpha = Image.new("L", (w, h), 0)
    ImageDraw.Draw(alpha).polygon(poly, fill=255)
    img = Image.fromarray((np.clip(rgb, 0, 1) * 255).round().astype(np.uint8), "RGB")
    img.putalpha(alpha)
    img.save(OUT / "starfish.png")
    save_polygons("starfish.json", [poly])


def bottle(rng):
    w, h = 60, 100
    poly = [(22, 4), (38, 4), (38, 24), (50, 36), (50, 96), (10, 96), (10, 36), (22, 24)]
    yy, xx = np.mgrid[0:h, 0:w]
    base = 0.3 + 0.4 * (xx / w) + 0.05 * rng.standard_normal((h, w))
    rgb = np.stack([base * 0.4, base, base * 0.7], axis=-1)
    Image.fromarray((np.clip(rgb, 0, 1) * 255).round().astype(np.uint8), "RGB").save(OUT / "bottle.png")
    save_polygons("bottle.json", [poly])


def backgrounds(rng):
    n = 128
    yy, xx = np.mgrid[0:n, 0:n]
    reef = 0.5 + 0.25 * np.sign(np.sin(xx / 2.0) * np.cos(yy / 3.0)) + 0.2 * rng.standard_normal((n, n))
    rgb = np.stack([reef * 0.3, reef * 0.8, reef], axis=-1)
    Image.fromarray((np.clip(rgb, 0, 1) * 255).round().astype(np.uint8), "RGB").save(OUT / "sharp_reef.png")

    pool = 0.35 + 0.1 * np.sin(xx / 40.0) + 0.08 * np.cos(yy / 35.0)
    rgb = np.stack([pool * 0.2, pool * 0.6, pool], axis=-1)
    img = Image.fromarray((np.clip(rgb, 0, 1) * 255).round().astype(np.uint8), "RGB")
    img.filter(ImageFilter.GaussianBlur(6)).save(OUT / "blurry_pool.png")

    Image.new("RGB", (64, 64), (100, 120, 140)).save(OUT / "constant.png")


def smoke_config():
    cfg = {
        "sources": [
            {"image": "starfish.png", "annotation": "starfish.json", "category": "starfish"},
            {"image": "bottle.png", "annotation": "bottle.json", "category": "bottle"},
        ],
        "backgrounds": ["sharp_reef.png", "blurry_pool.png"],
        "output": "../build/smoke_out",
        "counts": [1, 1, 1, 1],
        "seed": 7,
        "canvas": 128,
        "iterations": 10,
        "scale_set": [24, 32, 48],
        "weights": "../build/fixtures/random_vgg_prefix.ibwt",
    }
    (OUT / "smoke_config.json").write_text(json.dumps(cfg, indent=2) + "\n")


def main():
    OUT.mkdir(exist_ok=True)
    rng = np.random.default_rng(1234)
    starfish(rng)
    bottle(rng)
    backgrounds(rng)
    smoke_config()


if __name__ == "__main__":
    main()
