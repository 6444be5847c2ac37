import numpy as np
import pytest

from seco.types import ClassDef, Taxonomy, STUFF, THINGS


@pytest.fixture
def tax_small():
    """2 stuff + 2 things classes."""
    return Taxonomy((
        ClassDef("road", STUFF),
        ClassDef("sky", STUFF),
        ClassDef("car", THINGS),
        ClassDef("sign", THINGS),
    ))


def random_binary(rng, h, w, p=0.5):
    return rng.random((h, w)) < p


def flood_fill_components(data, adjacency=8, void=255):
    """Independent oracle: iterative flood fill over same-class pixels.

    Returns a set of frozensets of (y, x) pixel coords, one per component.
    """
    h, w = data.shape
    seen = np.zeros((h, w), dtype=bool)
    if adjacency == 8:
        steps = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
    else:
        steps = [(-1, 0), (1, 0), (0, -1), (0, 1)]
    comps = set()
    for y in range(h):
        for x in range(w):
            if seen[y, x] or data[y, x] == void:
                continue
            cls = data[y, x]
            stack = [(y, x)]
            seen[y, x] = True
            pixels = []
            while stack:
                cy, cx = stack.pop()
                pixels.append((cy, cx))
                for dy, dx in steps:
                    ny, nx = cy + dy, cx + dx
                    if 0 <= ny < h and 0 <= nx < w and not seen[ny, nx] \
                            and data[ny, nx] == cls:
                        seen[ny, nx] = True
                        stack.append((ny, nx))
            comps.add(frozenset(pixels))
    return comps
