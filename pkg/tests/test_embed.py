import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causalwalk.embed import VectorFormatError, VectorTable, embed_phrase, load_word_vectors


def write_vectors(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def test_load_two_line_file(tmp_path):
    path = write_vectors(tmp_path / "v.txt", ["alpha 1 2 3", "beta 3 4 7"])
    table = load_word_vectors(path)
    assert table.dim == 3
    assert len(table) == 2
    np.testing.assert_array_equal(table.vectors["alpha"], [1, 2, 3])


def test_load_rejects_ragged_lines(tmp_path):
    path = write_vectors(tmp_path / "v.txt", ["alpha 1 2 3", "beta 3 4"])
    with pytest.raises(VectorFormatError, match="2"):
        load_word_vectors(path)


def test_load_checks_expected_dim(tmp_path):
    path = write_vectors(tmp_path / "v.txt", ["alpha 1 2 3"])
    assert load_word_vectors(path, expected_dim=3).dim == 3
    with pytest.raises(VectorFormatError):
        load_word_vectors(path, expected_dim=100)


def test_load_hundred_dim_line(tmp_path):
    values = " ".join(str(i * 0.25) for i in range(100))
    path = write_vectors(tmp_path / "v.txt", [f"word {values}"])
    assert load_word_vectors(path).dim == 100


def make_table():
    return VectorTable(
        dim=3,
        vectors={
            "alpha": np.array([1.0, 2.0, 3.0]),
            "beta": np.array([3.0, 4.0, 7.0]),
        },
    )


def test_all_oov_phrase_is_zero_vector():
    np.testing.assert_array_equal(embed_phrase(make_table(), "qqxyz zzz"), np.zeros(3))


def test_single_word_phrase_is_its_vector():
    np.testing.assert_array_equal(embed_phrase(make_table(), "alpha"), [1, 2, 3])


def test_two_word_phrase_is_componentwise_mean():
    # hand-computed mean of the two loaded rows
    np.testing.assert_allclose(embed_phrase(make_table(), "alpha beta"), [2.0, 3.0, 5.0])


def test_oov_tokens_are_skipped_not_averaged():
    np.testing.assert_allclose(embed_phrase(make_table(), "alpha unknowntok"), [1, 2, 3])


def test_case_whitespace_punctuation_invariance():
    table = make_table()
    base = embed_phrase(table, "alpha beta")
    np.testing.assert_array_equal(embed_phrase(table, "  ALPHA   Beta?  "), base)
    np.testing.assert_array_equal(embed_phrase(table, "alpha, beta."), base)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.sampled_from(["alpha", "beta", "zz"]), min_size=1, max_size=6))
def test_mean_is_convex_combination(tokens):
    table = make_table()
    phrase = " ".join(tokens)
    out = embed_phrase(table, phrase)
    bound = np.max(
        [np.abs(v).max() for v in table.vectors.values()]
    )
    assert np.abs(out).max() <= bound + 1e-12


def test_deterministic_bitwise():
    table = make_table()
    a = embed_phrase(table, "alpha beta beta")
    b = embed_phrase(table, "alpha beta beta")
    np.testing.assert_array_equal(a, b)
