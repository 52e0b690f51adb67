"""PNG renders of an atlas, the sampled measure, and external rays.

Colours are a pure function of the label array and the component table, so
the same inputs always give byte-identical PNG files (no metadata chunks are
written).
"""

import colorsys

import numpy as np
from PIL import Image, ImageDraw

from .atlas import JULIA_NEAR, UNRESOLVED

GRAY = (128, 128, 128)
BLACK = (0, 0, 0)
GOLDEN = 0.6180339887498949


def cycle_color(cycle_id, phase, period):
    """Hue from the cycle id, brightness stepping down with the phase."""
    hue = (0.08 + cycle_id * GOLDEN) % 1.0
    value = 0.95 - 0.5 * (phase / max(period, 1))
    r, g, b = colorsys.hsv_to_rgb(hue, 0.55, value)
    return int(round(255 * r)), int(round(255 * g)), int(round(255 * b))


def palette(table):
    """id -> RGB for a component table {id: (cycle, phase, blob, bounded)}."""
    periods = {}
    for c, p, _, _ in table.values():
        periods[c] = max(periods.get(c, 0), p + 1)
    return {cid: cycle_color(c, p, periods[c]) for cid, (c, p, _, _) in table.items()}


def component_table(atlas):
    return {c.id: (c.cycle_id, c.phase, c.blob, c.bounded) for c in atlas.components.values()}


def atlas_rgb(labels, table):
    """H x W x 3 uint8 image: component colours, JULIA_NEAR black, UNRESOLVED gray."""
    labels = np.asarray(labels)
    img = np.empty(labels.shape + (3,), dtype=np.uint8)
    img[:] = GRAY
    pal = palette(table)
    if pal:
        ids = np.array(sorted(pal), dtype=np.int64)
        cols = np.array([pal[i] for i in ids], dtype=np.uint8)
        lut = np.full((ids.max() + 1, 3), GRAY, dtype=np.uint8)
        lut[ids] = cols
        ok = labels >= 0
        img[ok] = lut[labels[ok]]
    img[labels == JULIA_NEAR] = BLACK
    img[labels == UNRESOLVED] = GRAY
    return img


def density_grid(points, window):
    """Sample counts per atlas cell (rows top to bottom); points outside are dropped."""
    pts = np.asarray(points, dtype=np.complex128)
    pts = pts[np.isfinite(pts)]
    n = window.resolution
    x0 = window.center.real - window.half_width
    y1 = window.center.imag + window.half_width
    col = np.floor((pts.real - x0) / window.cell).astype(np.int64)
    row = np.floor((y1 - pts.imag) / window.cell).astype(np.int64)
    ok = (col >= 0) & (col < n) & (row >= 0) & (row < n)
    grid = np.zeros((n, n), dtype=np.int64)
    np.add.at(grid, (row[ok], col[ok]), 1)
    return grid


def heat(grid):
    """Log-scaled counts mapped onto a black-red-yellow-white ramp, with an alpha mask."""
    g = np.log1p(grid.astype(np.float64))
    top = g.max()
    t = g / top if top > 0 else g
    r = np.clip(3 * t, 0, 1)
    gch = np.clip(3 * t - 1, 0, 1)
    b = np.clip(3 * t - 2, 0, 1)
    rgb = (np.stack([r, gch, b], axis=-1) * 255).round().astype(np.uint8)
    return rgb, grid > 0


def density_rgb(labels, table, points, window, dim=0.35):
    """The atlas dimmed, with the sample density painted over it."""
    base = (atlas_rgb(labels, table).astype(np.float64) * dim).round().astype(np.uint8)
    rgb, mask = heat(density_grid(points, window))
    base[mask] = rgb[mask]
    return base


def _pixel(window, z):
    x0 = window.center.real - window.half_width
    y1 = window.center.imag + window.half_width
    return ((z.real - x0) / window.cell, (y1 - z.imag) / window.cell)


def draw_rays(img, window, rays, color=(255, 255, 255)):
    """Polylines through ray samples (already in window coordinates)."""
    im = Image.fromarray(img)
    dr = ImageDraw.Draw(im)
    for pts in rays:
        xy = [_pixel(window, complex(z)) for z in pts if np.isfinite(z)]
        if len(xy) > 1:
            dr.line(xy, fill=color, width=1)
    return np.asarray(im)


def save_png(img, path):
    Image.fromarray(np.asarray(img, dtype=np.uint8), "RGB").save(path, format="PNG", optimize=False)


def render_all(atlas, samples, out_dir, rays=(), stem="atlas"):
    """Write {stem}.png, {stem}_density.png and, with rays, {stem}_rays.png. Returns the paths."""
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    labels = atlas.dump_labels()
    table = component_table(atlas)
    paths = [out / f"{stem}.png", out / f"{stem}_density.png"]
    save_png(atlas_rgb(labels, table), paths[0])
    save_png(density_rgb(labels, table, samples, atlas.window), paths[1])
    if rays:
        p = out / f"{stem}_rays.png"
        save_png(draw_rays(atlas_rgb(labels, table), atlas.window, rays), p)
        paths.append(p)
    return paths
