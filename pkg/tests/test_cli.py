import json

import pytest
from click.testing import CliRunner

from isoflag.cli import main


@pytest.fixture
def run():
    runner = CliRunner()
    return lambda *args: runner.invoke(main, list(args))


def out(res):
    return json.loads(res.stdout)


def test_classify_case_I(run):
    res = run("classify", "--a", "n", "--b", "n", "--c", "1^n", "--n", "3")
    assert res.exit_code == 0
    v = out(res)
    assert v["finite"] is True and v["cases"] == ["I"] and v["dimG"] == 21


def test_classify_infinite(run):
    res = run("classify", "--a", "2", "--b", "2", "--c", "2", "--n", "3")
    assert res.exit_code == 0 and out(res)["finite"] is False


def test_classify_small(run):
    v = out(run("classify", "--a", "1", "--b", "1", "--c", "1", "--n", "1"))
    assert v["finite"] is True and {"I", "III"} <= set(v["cases"])


def test_classify_square_classes(run):
    v = out(run("classify", "--a", "1", "--b", "1", "--c", "1", "--n", "3",
                "--square-classes", "unknown"))
    assert v["finite"] == "conditional"


def test_classify_invalid(run):
    assert run("classify", "--a", "4", "--b", "1", "--c", "1", "--n", "3").exit_code == 2
    assert run("classify", "--a", "x", "--b", "1", "--c", "1", "--n", "3").exit_code == 2


def test_classify_output_is_stable(run):
    args = ("classify", "--a", "1", "--b", "2", "--c", "1,1", "--n", "2")
    a, b = run(*args), run(*args)
    assert a.stdout == b.stdout
    assert list(json.loads(a.stdout)) == sorted(json.loads(a.stdout))


def _write(tmp_path, name, text):
    f = tmp_path / name
    f.write_text(text)
    return str(f)


def test_canonicalize_b2(run, tmp_path):
    pair = _write(tmp_path, "pair.txt", "1 3\n1 3 3\n1 0 0\n1 3 3\n1 0 0\n")
    v = _write(tmp_path, "v.txt", "1 3\n1 3 3\n1 1 1\n")
    res = run("canonicalize", "--n", "1", "--p", "3", "--pair", pair, "--v", v)
    assert res.exit_code == 0
    r = out(res)
    assert r["tuple"] == {"b": [0, 1] + [0] * 13, "eps": 0}
    assert len(r["trace"]) == 9


def test_canonicalize_representative_echo(run, tmp_path):
    pair = _write(tmp_path, "pair.txt", "1 3\n1 3 3\n1 0 0\n1 3 3\n0 0 1\n")
    v = _write(tmp_path, "v.txt", "1 3\n1 3 3\n1 1 1\n")
    r = out(run("canonicalize", "--n", "1", "--p", "3", "--pair", pair, "--v", v))
    assert r["tuple"]["b"][14] == 1 and r["tuple"]["eps"] == 1


def test_canonicalize_malformed(run, tmp_path):
    pair = _write(tmp_path, "pair.txt", "1 3\n1 3 3\n1 0\n")
    v = _write(tmp_path, "v.txt", "1 3\n1 3 3\n1 1 1\n")
    assert run("canonicalize", "--n", "1", "--p", "3", "--pair", pair, "--v", v).exit_code == 2


def test_canonicalize_pair_not_in_model_position(run, tmp_path):
    pair = _write(tmp_path, "pair.txt", "1 3\n1 3 3\n0 0 1\n1 3 3\n1 0 0\n")
    v = _write(tmp_path, "v.txt", "1 3\n1 3 3\n1 1 1\n")
    assert run("canonicalize", "--n", "1", "--p", "3", "--pair", pair, "--v", v).exit_code == 2


def test_verify_th310(run):
    res = run("verify", "--suite", "th310", "--n", "2", "--p", "3")
    assert res.exit_code == 0 and out(res)["pass"] is True


def test_verify_cor93(run):
    res = run("verify", "--suite", "cor93", "--n", "3", "--p", "3")
    r = out(res)
    assert res.exit_code == 0 and r["hashimoto"]["orbit_count"] == 9 == r["hashimoto"]["formula"]


def test_verify_sample_needs_seed(run):
    assert run("verify", "--suite", "canon-sample").exit_code == 2
    assert run("verify", "--suite", "canon-sample", "--seed", "1").exit_code == 0


def test_verify_bad_prime(run):
    assert run("verify", "--suite", "th310", "--p", "4").exit_code == 2


def test_verify_mismatch_exit_code(run):
    # the incidence at {0, 1} differs from the two-sided law, so this reports a mismatch
    res = run("verify", "--suite", "family-lem29", "--p", "3")
    assert res.exit_code == 4 and out(res)["necessity"] is True


def test_verify_budget(run, monkeypatch):
    from isoflag.orbit_oracle import gl_flag_points, isotropic_flag_points
    isotropic_flag_points.cache_clear()
    gl_flag_points.cache_clear()
    monkeypatch.setenv("ISOFLAG_BUDGET", "10")
    res = run("verify", "--suite", "th310", "--n", "2")
    assert res.exit_code == 5 and out(res)["pass"] is False
