"""Deterministic text-like test scenes built from random glyph stamps.

A shared alphabet of blocky binary glyphs is stamped onto line/column grids
to produce a clean query scene plus database pages with the same geometry
and alphabet but different glyph sequences. Everything derives from a
single seed, so scenes are bit-reproducible.
"""

from __future__ import annotations

import numpy as np

__all__ = ["glyph_alphabet", "glyph_page", "make_corpus"]

# Stamp spacing leaves gaps >= GLYPH_SIZE so any 8x8 patch overlaps at most
# one stamp; the database then always holds same-glyph same-phase matches.
GLYPH_SIZE = 8
LINE_START = 4
LINE_STEP = 16
COL_START = 4
COL_STEP = 16
BACKGROUND = 230.0
INK_LOW = 15.0
INK_HIGH = 45.0
DEFECT_PROB = 0.25


def glyph_alphabet(seed: int, n_glyphs: int = 8) -> np.ndarray:
    """Blocky 8x8 binary glyph masks: a seeded 4x4 coin flip upsampled x2."""
    rng = np.random.default_rng(seed)
    coarse = rng.random((n_glyphs, 4, 4)) < 0.45
    return np.kron(coarse, np.ones((2, 2))).astype(np.float64)


def glyph_page(
    alphabet: np.ndarray, seed: int, width: int = 128, height: int = 128
) -> np.ndarray:
    """Stamp randomly chosen glyphs onto the line/column grid of a page.

    Stamps carry print-like variation so recurring glyphs are similar but
    rarely identical: the ink level varies per stamp, and occasionally one
    coarse glyph cell is flipped (a printing defect).
    """
    rng = np.random.default_rng(seed)
    page = np.full((height, width), BACKGROUND, dtype=np.float64)
    rows = range(LINE_START, height - GLYPH_SIZE + 1, LINE_STEP)
    cols = range(COL_START, width - GLYPH_SIZE + 1, COL_STEP)
    for r in rows:
        for c in cols:
            mask = alphabet[rng.integers(len(alphabet))].copy()
            if rng.random() < DEFECT_PROB:
                cell_r, cell_c = 2 * rng.integers(4), 2 * rng.integers(4)
                cell = mask[cell_r : cell_r + 2, cell_c : cell_c + 2]
                cell[:] = 1.0 - cell
            ink = rng.uniform(INK_LOW, INK_HIGH)
            block = page[r : r + GLYPH_SIZE, c : c + GLYPH_SIZE]
            block[mask > 0] = ink
    return page


def make_corpus(
    seed: int, db_count: int = 4, width: int = 128, height: int = 128
) -> tuple[np.ndarray, list[np.ndarray]]:
    """A clean query scene plus db_count same-alphabet database pages."""
    children = np.random.SeedSequence(seed).generate_state(2 + db_count)
    alphabet = glyph_alphabet(int(children[0]))
    clean = glyph_page(alphabet, int(children[1]), width, height)
    pages = [
        glyph_page(alphabet, int(children[2 + i]), width, height)
        for i in range(db_count)
    ]
    return clean, pages
