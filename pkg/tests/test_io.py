import json
import math

import numpy as np
import pytest

from mvlab.io import atomic_write_text, dumps_json, read_binary, sanitize, write_binary, write_json


def test_sanitize_converts_numpy_and_non_finite():
    out = sanitize({"a": np.float64(1.5), "b": np.int32(3), "c": np.array([1.0, np.nan]), "d": math.inf,
                    "e": np.bool_(True), 1: (2, 3)})
    assert out == {"a": 1.5, "b": 3, "c": [1.0, None], "d": None, "e": True, "1": [2, 3]}


def test_json_is_canonical_and_strict():
    text = dumps_json({"b": 1, "a": float("nan")})
    assert "NaN" not in text and json.loads(text) == {"a": None, "b": 1}
    assert text.index('"a"') < text.index('"b"')


def test_atomic_write_leaves_no_temp_files(tmp_path):
    p = tmp_path / "sub" / "f.txt"
    atomic_write_text(p, "one")
    atomic_write_text(p, "two")
    assert p.read_text() == "two"
    assert [q.name for q in p.parent.iterdir()] == ["f.txt"]


def test_atomic_write_cleans_up_on_error(tmp_path):
    with pytest.raises(TypeError):
        write_json(tmp_path / "x.json", {"bad": object()})
    assert list(tmp_path.iterdir()) == []


def test_binary_round_trip(tmp_path):
    a = np.random.default_rng(0).random((3, 4, 5))
    path, side = write_binary(tmp_path / "a.f64", a, seed=7)
    b, meta = read_binary(path)
    assert np.array_equal(a, b)
    assert meta["shape"] == [3, 4, 5] and meta["dtype"] == "<f8" and meta["seed"] == 7
    assert path.stat().st_size == a.size * 8
