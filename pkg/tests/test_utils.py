import json
import logging
import math

import numpy as np
import pytest

from modules.utils import config
from modules.utils.config import worker_count
from modules.utils.errors import DomainEvaluationError, InvalidInputError
from modules.utils.io import fmt, json_number, write_csv, write_json
from modules.utils.logs import LOG_FORMAT, setup_logging
from modules.utils.numeric import evaluate, evaluate_unary, first_bad


def test_write_csv_creates_parents_and_leaves_no_temp_files(tmp_path):
    target = write_csv(tmp_path / "nested" / "table.csv", ["a", "b"], [[1, 0.1], [2, 1 / 3]], trailer=["note"])
    assert target.read_text().splitlines() == ["a,b", "1,0.1", f"2,{1 / 3!r}", "# note"]
    assert [p.name for p in target.parent.iterdir()] == ["table.csv"]


def test_failed_write_keeps_the_old_file(tmp_path):
    target = write_csv(tmp_path / "table.csv", ["a"], [[1]])

    def rows():
        yield [2]
        raise RuntimeError("interrupted")

    with pytest.raises(RuntimeError):
        write_csv(target, ["a"], rows())
    assert target.read_text() == "a\n1\n"
    assert [p.name for p in tmp_path.iterdir()] == ["table.csv"]


def test_write_json_is_sorted_and_strict(tmp_path):
    target = write_json(tmp_path / "out.json", {"b": 1, "a": [1.5]})
    assert target.read_text().index('"a"') < target.read_text().index('"b"')
    assert json.loads(target.read_text()) == {"a": [1.5], "b": 1}
    with pytest.raises(ValueError):
        write_json(tmp_path / "nan.json", {"x": float("nan")})


@pytest.mark.parametrize("value, expected", [
    (1.5, 1.5),
    (np.float64(2.0), 2.0),
    (None, None),
    (float("nan"), None),
    (math.inf, None),
    (-math.inf, None),
])
def test_json_number(value, expected):
    assert json_number(value) == expected


def test_fmt_round_trips():
    value = 0.1 + 0.2
    assert float(fmt(value)) == value


def test_worker_count(monkeypatch):
    assert worker_count(3) == 3
    monkeypatch.setitem(config.settings, "threads", 2)
    assert worker_count() == 2
    monkeypatch.setitem(config.settings, "threads", 0)
    assert worker_count() >= 1
    assert worker_count(-4) >= 1


def test_evaluate_broadcasts_scalars():
    out = evaluate(lambda x, t: 2.0, np.zeros(4))
    assert out.shape == (4,)
    assert np.all(out == 2.0)


def test_evaluate_falls_back_to_elementwise_calls():
    out = evaluate(lambda x, t: math.sqrt(x) + t, np.array([1.0, 4.0]), 1.0)
    assert out.tolist() == [2.0, 3.0]


def test_evaluate_wraps_scalar_math_domain_errors():
    with pytest.raises(DomainEvaluationError) as err:
        evaluate(lambda x, t: math.sqrt(x), np.array([1.0, -4.0, -9.0]), 0.5)
    assert err.value.x == -4.0
    assert err.value.t == 0.5
    assert isinstance(err.value, ArithmeticError)


def test_evaluate_lets_package_errors_through():
    def refuse(x, t):
        raise InvalidInputError("no")

    with pytest.raises(InvalidInputError):
        evaluate(refuse, np.array([1.0]))


def test_evaluate_unary():
    assert evaluate_unary(lambda u: u ** 2, np.array([2.0, 3.0])).tolist() == [4.0, 9.0]


def test_first_bad():
    assert first_bad(np.array([False, True, True])) == 1
    assert first_bad(np.zeros(3, dtype=bool)) is None


def test_setup_logging_writes_to_the_log_dir(tmp_path):
    root = logging.getLogger()
    saved, level = root.handlers[:], root.level
    root.handlers = []
    try:
        logger = setup_logging("noisecalc.test", "test.log", log_dir=tmp_path)
        logger.warning("hello")
        for handler in root.handlers:
            handler.flush()
        assert "hello" in (tmp_path / "test.log").read_text()
        assert "%(levelname)-8s" in LOG_FORMAT
    finally:
        for handler in root.handlers:
            handler.close()
        root.handlers = saved
        root.setLevel(level)
