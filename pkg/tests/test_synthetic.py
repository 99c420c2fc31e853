"""Synthetic glyph scenes: determinism and basic structure."""

import numpy as np

from patchdenoise.synthetic import glyph_alphabet, glyph_page, make_corpus


def test_corpus_is_deterministic():
    a_clean, a_pages = make_corpus(7)
    b_clean, b_pages = make_corpus(7)
    np.testing.assert_array_equal(a_clean, b_clean)
    for pa, pb in zip(a_pages, b_pages):
        np.testing.assert_array_equal(pa, pb)


def test_different_seeds_differ():
    a_clean, _ = make_corpus(7)
    b_clean, _ = make_corpus(8)
    assert not np.array_equal(a_clean, b_clean)


def test_scene_dimensions_and_range():
    clean, pages = make_corpus(3, db_count=2, width=96, height=80)
    assert clean.shape == (80, 96)
    assert len(pages) == 2
    for img in [clean] + pages:
        assert img.min() >= 0.0 and img.max() <= 255.0
        assert len(np.unique(img)) > 2  # ink variation, not a binary image


def test_pages_share_alphabet_but_differ():
    clean, pages = make_corpus(5)
    assert not np.array_equal(pages[0], pages[1])


def test_alphabet_blocky_binary():
    glyphs = glyph_alphabet(1, n_glyphs=6)
    assert glyphs.shape == (6, 8, 8)
    assert set(np.unique(glyphs)) <= {0.0, 1.0}
    # 2x2 upsampling leaves every odd row/column equal to its even neighbor
    np.testing.assert_array_equal(glyphs[:, ::2, :], glyphs[:, 1::2, :])


def test_page_background_dominates():
    alphabet = glyph_alphabet(2)
    page = glyph_page(alphabet, 9)
    assert (page == 230.0).mean() > 0.5
