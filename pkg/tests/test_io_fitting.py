import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from shearlab import io
from shearlab.errors import ArtifactIOError
from shearlab.fitting import loglog_fit


@given(st.lists(st.tuples(st.floats(allow_nan=False, allow_infinity=False), st.integers()), max_size=20))
def test_csv_roundtrip(rows):
    text = io.csv_text(["a", "b"], rows)
    back = [line.split(",") for line in text.splitlines()[1:]]
    assert [(float(a), int(b)) for a, b in back] == [(float(a), b) for a, b in rows]


def test_atomic_write_and_hash(tmp_path):
    p = io.write_json(tmp_path / "x.json", {"b": 1, "a": [1.5]})
    assert p.read_text() == io.json_text({"a": [1.5], "b": 1})
    assert len(io.sha256_file(p)) == 64
    with pytest.raises(ArtifactIOError):
        io.atomic_write_text(p / "child", "x")


def test_read_csv(tmp_path):
    io.write_csv(tmp_path / "t.csv", ["x", "y"], [(1, 2.5)])
    head, rows = io.read_csv(tmp_path / "t.csv")
    assert head == ["x", "y"] and rows == [["1", "2.5"]]


def test_loglog_fit_exact():
    x = np.array([0.5, 0.2, 0.1, 0.05])
    f = loglog_fit(x, 3 * x**-2)
    assert f.slope == pytest.approx(-2, abs=1e-12)
    assert f.r2 == pytest.approx(1)
    lo, hi = f.ci()
    assert lo <= f.slope <= hi


def test_loglog_fit_rejects_nonpositive():
    with pytest.raises(ValueError):
        loglog_fit([1, 2], [1, -1])
