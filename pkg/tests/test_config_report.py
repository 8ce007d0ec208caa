import json
import math

import numpy as np
import pytest

from lcgeom import report
from lcgeom.bodies import parse_body
from lcgeom.config import build_config, load_config, parse_lines
from lcgeom.errors import ConfigError


def test_parse_lines_comments_and_blanks():
    kv = parse_lines("# header\n\nN = 10   # trailing\nspec.family=gaussian\n")
    assert kv == {"N": "10", "spec.family": "gaussian"}


@pytest.mark.parametrize("text", ["N = 1\nN = 2\n", "just words\n"])
def test_parse_lines_rejects(text):
    with pytest.raises(ConfigError):
        parse_lines(text)


def test_defaults_and_spec():
    cfg = build_config("shell", {"spec.family": "gaussian", "spec.n": "8"})
    assert cfg.seed == 0 and cfg["N"] == 100_000 and cfg["t-grid"] == [0.05, 0.1, 0.2, 0.5]
    assert cfg.spec.family == "gaussian" and cfg.spec.dim == 8


@pytest.mark.parametrize("exp, kv", [
    ("shell", {"spec.family": "gaussian", "spec.n": "8", "bogus": "1"}),
    ("shell", {"spec.family": "gaussian", "spec.n": "8", "t-grid": "0.2,0.1"}),
    ("shell", {}),
    ("volume", {}),
    ("volume", {"body": "cube:n=2", "spec.family": "gaussian"}),
    ("hull", {"n": "x", "points": "3"}),
    ("shell", {"spec.family": "cube", "spec.n": "4"}),
    ("nope", {}),
])
def test_config_errors(exp, kv):
    with pytest.raises(ConfigError):
        build_config(exp, kv)


def test_config_for_other_experiment_rejected():
    with pytest.raises(ConfigError):
        build_config("shell", {"experiment": "volume", "body": "ball:n=2"})


def test_to_text_round_trip(tmp_path):
    cfg = load_config("clt", None, ["spec.family=uniform_cube", "spec.n=6", "directions=12", "seed=4"])
    p = tmp_path / "c.config"
    p.write_text(cfg.to_text())
    again = load_config("clt", str(p))
    assert again.values == cfg.values and again.spec == cfg.spec
    assert again.to_text() == cfg.to_text()


def test_missing_config_file_is_config_error(tmp_path):
    with pytest.raises(ConfigError):
        load_config("shell", str(tmp_path / "absent"))


def test_parse_body_descriptors():
    assert parse_body("cube:n=3,half=2").volume == pytest.approx(64)
    assert parse_body("ellipsoid:axes=1,4").volume == pytest.approx(4 * math.pi)
    assert parse_body("ball:n=2").volume == pytest.approx(math.pi)
    with pytest.raises(ConfigError):
        parse_body("torus:n=3")


def test_record_schema_and_nan_flag():
    r = report.record("x", "y", estimate=np.float64("nan"), ci=[0.0, np.inf], passed=np.bool_(True))
    report.validate(r)
    assert r["estimate"] is None and r["ci"] == [0.0, None] and r["pass"] is True
    assert sum("non-finite" in f for f in r["flags"]) == 2


def test_record_without_ci_is_flagged():
    assert "no confidence interval" in report.record("x", "y", estimate=1.0)["flags"]
    assert report.record("x", "y", estimate=1.0, exact=True)["flags"] == []


def test_validate_rejects_extra_fields():
    r = report.record("x", "y")
    r["extra"] = 1
    with pytest.raises(ValueError):
        report.validate(r)


def test_dumps_is_sorted_json_lines():
    recs = [report.record("a", "b", estimate=np.int64(3), exact=True), report.record("c", "d")]
    text = report.dumps(recs)
    lines = text.splitlines()
    assert len(lines) == 2 and text.endswith("\n")
    assert list(json.loads(lines[0])) == sorted(report.FIELDS)
    assert report.dumps([]) == ""


def test_write_report_files(tmp_path):
    recs = [report.record("a", "b", passed=True), report.record("a", "c", passed=False)]
    path = report.write_report(tmp_path / "out", "a", recs, "k = v\n", {"runtime": 1.5})
    assert open(path).read() == report.dumps(recs)
    summ = json.loads((tmp_path / "out" / "a.summary.json").read_text())
    assert summ["passed"] == 1 and summ["failed"] == 1 and summ["runtime"] == 1.5
    assert (tmp_path / "out" / "a.config").read_text() == "k = v\n"


def test_write_csv_repr_floats(tmp_path):
    p = tmp_path / "t.csv"
    report.write_csv(p, ["a", "b"], [(1, 0.1), (2, np.float32(0.5))])
    assert p.read_text().splitlines() == ["a,b", "1,0.1", "2,0.5"]
