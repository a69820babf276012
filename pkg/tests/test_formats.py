import json
import math

import numpy as np

from hankelspec import formats


def test_format_float_17_digits():
    assert formats.format_float(0.1) == "0.10000000000000001"
    assert formats.format_float(1.0) == "1"
    assert float(formats.format_float(-2.5e-300)) == -2.5e-300
    assert formats.format_float(1 / 3) == "0.33333333333333331"


def test_format_float_round_trips_doubles():
    rng = np.random.default_rng(0)
    for _ in range(200):
        x = float(rng.standard_normal() * 10.0 ** rng.integers(-200, 200))
        assert float(formats.format_float(x)) == x


def test_dumps_json_scalars_and_nesting():
    text = formats.dumps_json({"a": 1, "b": [True, None, "x,y"], "c": 0.5})
    obj = json.loads(text)
    assert obj == {"a": 1, "b": [True, None, "x,y"], "c": 0.5}


def test_dumps_json_floats_use_17_digits():
    text = formats.dumps_json({"v": 0.1})
    assert "0.10000000000000001" in text


def test_dumps_json_complex_as_re_im_pair():
    obj = json.loads(formats.dumps_json({"z": 1 + 2j}))
    assert obj["z"] == [1, 2]


def test_dumps_json_nonfinite_as_strings():
    obj = json.loads(formats.dumps_json({"a": math.inf, "b": -math.inf}))
    assert obj["a"] == "inf" and obj["b"] == "-inf"


def test_dumps_json_deterministic_key_order():
    a = formats.dumps_json({"b": 1, "a": 2})
    b = formats.dumps_json({"a": 2, "b": 1})
    assert a == b


def test_complex_array_csv_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    arr = rng.standard_normal((4, 3)) + 1j * rng.standard_normal((4, 3))
    path = tmp_path / "arr.csv"
    formats.write_complex_array_csv(path, arr)
    back = formats.read_complex_array_csv(path)
    assert back.shape == arr.shape
    assert np.array_equal(back, arr)


def test_complex_array_csv_header_names(tmp_path):
    path = tmp_path / "arr.csv"
    formats.write_complex_array_csv(path, np.zeros((2, 2, 2), dtype=complex))
    header = path.read_text().splitlines()[0]
    assert header == "index_1,index_2,index_3,re,im"


def test_complex_array_csv_1d_round_trip(tmp_path):
    arr = np.array([1.0, 1j, -1.0, -1j])
    path = tmp_path / "vec.csv"
    formats.write_complex_array_csv(path, arr)
    assert np.array_equal(formats.read_complex_array_csv(path), arr)


def test_write_table_csv_quotes_commas(tmp_path):
    path = tmp_path / "t.csv"
    formats.write_table_csv(path, ["name", "value"], [["a,b", 0.5]])
    text = path.read_text()
    assert '"a,b"' in text
    assert "0.5" in text


def test_write_table_csv_deterministic_bytes(tmp_path):
    rows = [[1, 2, 0.1], [3, 4, 0.2]]
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    formats.write_table_csv(p1, ["i", "j", "v"], rows)
    formats.write_table_csv(p2, ["i", "j", "v"], rows)
    assert p1.read_bytes() == p2.read_bytes()
