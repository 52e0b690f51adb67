import numpy as np
from hypothesis import given
from hypothesis import strategies as st
from PIL import Image

from mme_lab.atlas import JULIA_NEAR, UNRESOLVED, GridWindow, build_atlas
from mme_lab.cycles import find_cycles
from mme_lab.maps import RationalMap
from mme_lab.render import (
    BLACK,
    GRAY,
    atlas_rgb,
    component_table,
    cycle_color,
    density_grid,
    palette,
    render_all,
)
from mme_lab.sampler import sample_backward

SQUARE = RationalMap.from_coeffs([0, 0, 1])


def _square(res=128):
    a = build_atlas(SQUARE, GridWindow(0, 2.0, res), find_cycles(SQUARE, 2))
    s = sample_backward(SQUARE, 2.0, 60, 5000, 1)
    return a, s


def test_square_colours():
    a, _ = _square()
    img = atlas_rgb(a.dump_labels(), component_table(a))
    colours = {tuple(c) for c in img.reshape(-1, 3)}
    assert BLACK in colours and len(colours - {BLACK}) == 2
    assert tuple(img[64, 64]) != tuple(img[0, 0])


def test_special_labels():
    labels = np.array([[JULIA_NEAR, UNRESOLVED]], dtype=np.int32)
    img = atlas_rgb(labels, {})
    assert tuple(img[0, 0]) == BLACK and tuple(img[0, 1]) == GRAY


def test_density_on_circle():
    a, s = _square()
    g = density_grid(s.points, a.window)
    assert g.sum() == 5000
    rows, cols = np.nonzero(g)
    z = np.array([a.window.center_of(r, c) for r, c in zip(rows, cols)])
    assert np.all(np.abs(np.abs(z) - 1) < 2 * a.window.cell)


@given(st.integers(0, 50), st.integers(1, 8), st.data())
def test_colour_is_deterministic(cid, period, data):
    phase = data.draw(st.integers(0, period - 1))
    c = cycle_color(cid, phase, period)
    assert c == cycle_color(cid, phase, period)
    assert all(0 <= v <= 255 for v in c) and c != BLACK


def test_phases_differ_in_brightness():
    table = {0: (3, 0, 0, True), 1: (3, 1, 1, True)}
    pal = palette(table)
    assert sum(pal[0]) > sum(pal[1])


def test_render_all(tmp_path):
    a, s = _square(64)
    paths = render_all(a, s.points, tmp_path, rays=[np.linspace(1.0, 2.0, 10)])
    assert [p.name for p in paths] == ["atlas.png", "atlas_density.png", "atlas_rays.png"]
    for p in paths:
        im = Image.open(p)
        assert im.size == (64, 64) and im.mode == "RGB"
    first = [p.read_bytes() for p in paths]
    render_all(a, s.points, tmp_path, rays=[np.linspace(1.0, 2.0, 10)])
    assert first == [p.read_bytes() for p in paths]
