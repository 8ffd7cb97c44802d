import csv
import hashlib
import json

import pytest

from kswkit.cli import main


def run(tmp_path, name, *args, config=None):
    out = tmp_path / name
    argv = list(args) + ["--out", str(out)]
    if config is not None:
        cfg = tmp_path / f"{name}.cfg"
        cfg.write_text(config)
        argv += ["--config", str(cfg)]
    return main(argv), out


def outputs(out):
    return {p.name: p.read_bytes() for p in sorted(out.iterdir()) if p.name != "manifest.json"}


def test_ntt_verify_small(tmp_path):
    code, out = run(tmp_path, "a", "ntt-verify", config="sizes = 16, 64\nprimes = 2\ninputs = 2\n")
    assert code == 0
    rows = list(csv.DictReader((out / "ntt_verify.csv").open()))
    assert {r["suite"] for r in rows} == {"equivalence", "roundtrip", "convolution", "fixed_twiddle"}
    assert all(r["passed"] == r["total"] for r in rows)


def test_ntt_verify_corrupted_hook_fails(tmp_path):
    code, _ = run(tmp_path, "a", "ntt-verify", config="sizes = 64\ncorrupt_twiddle = N22\n")
    assert code == 1


@pytest.mark.parametrize("cfg", ["sizes =\n", "corrupt_twiddle = N99\n", "sizes = abc\n"])
def test_ntt_verify_usage_errors(tmp_path, cfg):
    assert run(tmp_path, "a", "ntt-verify", config=cfg)[0] == 2


def test_ksw_verify_and_determinism(tmp_path):
    cfg = "n = 512\ninputs = 3\nlevels = 8, 2\n"
    c1, o1 = run(tmp_path, "a", "ksw-verify", "--seed", "5", config=cfg)
    c2, o2 = run(tmp_path, "b", "ksw-verify", "--seed", "5", config=cfg)
    assert c1 == c2 == 0
    assert outputs(o1) == outputs(o2)
    rows = list(csv.DictReader((o1 / "ksw_noise.csv").open()))
    assert len(rows) == 3 * 2 * 2
    assert all(r["within_bound"] == "1" and r["agree"] == "1" for r in rows)


def test_ksw_verify_h_above_n(tmp_path):
    assert run(tmp_path, "a", "ksw-verify", config="n = 64\nh = 65\n")[0] == 2


def test_cost_outputs_and_bytes(tmp_path):
    c1, o1 = run(tmp_path, "a", "cost")
    c2, o2 = run(tmp_path, "b", "cost")
    assert c1 == c2 == 0
    assert outputs(o1) == outputs(o2)
    rows = list(csv.DictReader((o1 / "method_comparison.csv").open()))
    assert len(rows) == 12 and all(r["sign_ok"] == "1" for r in rows)
    curve = list(csv.DictReader((o1 / "alpha_curves.csv").open()))
    assert list(curve[0]) == ["l", "alpha", "modmuls"]


def test_cost_empty_alpha_set(tmp_path):
    assert run(tmp_path, "a", "cost", config="alpha_set =\n")[0] == 2


def test_cost_json_format(tmp_path):
    code, out = run(tmp_path, "a", "cost", "--format", "json")
    assert code == 0
    assert json.loads((out / "instance.json").read_text())[1]["ekey_bytes"] == 188743680


def test_alpha_plan(tmp_path):
    code, out = run(tmp_path, "a", "alpha-plan", "--rescan")
    assert code == 0
    doc = json.loads((out / "alpha_plan.json").read_text())
    assert doc["L"] == 38 and not doc["constant"] and doc["rescan_argmin"]
    code, out = run(tmp_path, "b", "alpha-plan", config="L = 0\n")
    assert code == 0
    assert len(json.loads((out / "alpha_plan.json").read_text())["schedule"]) == 1


def test_simulate_both_modes(tmp_path):
    code, out = run(tmp_path, "a", "simulate", "--workload", "bootstrapping", "--profile", "taiyi")
    assert code == 0
    ser = json.loads((out / "sim_serial.json").read_text())
    par = json.loads((out / "sim_parallel.json").read_text())
    assert par["total_cycles"] <= ser["total_cycles"]


def test_simulate_sharp_like_breakdown(tmp_path):
    code, out = run(tmp_path, "a", "simulate", "--profile", "sharp-like", "--mode", "serial")
    assert code == 0
    shares = {r["class"]: float(r["share"]) for r in csv.DictReader((out / "breakdown.csv").open())}
    assert shares["ip"] > shares["ntt"]


@pytest.mark.parametrize("flag,value", [("--profile", "nope"), ("--workload", "nope")])
def test_simulate_unknown_names(tmp_path, flag, value):
    assert run(tmp_path, "a", "simulate", flag, value)[0] == 2


def test_manifest_hashes(tmp_path):
    code, out = run(tmp_path, "a", "simulate", "--mode", "parallel")
    m = json.loads((out / "manifest.json").read_text())
    assert m["subcommand"] == "simulate" and m["seed"] == 0 and m["exit_status"] == code
    for art in m["artifacts"]:
        assert hashlib.sha256((out / art["path"]).read_bytes()).hexdigest() == art["sha256"]


def test_figures_are_byte_stable(tmp_path):
    pytest.importorskip("matplotlib")
    _, o1 = run(tmp_path, "a", "alpha-plan", "--figures")
    _, o2 = run(tmp_path, "b", "alpha-plan", "--figures")
    assert (o1 / "alpha_plan.svg").read_bytes() == (o2 / "alpha_plan.svg").read_bytes()


def test_bad_seed(tmp_path):
    assert run(tmp_path, "a", "cost", "--seed", "-1")[0] == 2
