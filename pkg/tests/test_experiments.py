import json
import math

import numpy as np
import pytest
from pydantic import ValidationError

from zakharov.experiments import (
    ExperimentConfig,
    RunRecord,
    bump_field,
    dilation_levels,
    record_to_json,
    run,
    sweep,
    verify,
    write_record,
)
from zakharov import DomainSpec

PI = math.pi

DOMAIN = {"dimension": 1, "extents": [PI], "bc": "navier", "n": 96}
PARAMS = {"kappa": 3.5, "omega_sq": 1.0, "functional": "zakharov"}


def make(task, **kw):
    base = {"task": task, "domain": dict(DOMAIN)}
    base.update(kw)
    return ExperimentConfig(**base)


def test_config_validation():
    with pytest.raises(ValidationError):
        make("explode")
    with pytest.raises(ValidationError):
        make("solve", params={"kappa": 1.0, "functional": "taylor9"})
    with pytest.raises(ValidationError):
        make("solve", params=dict(PARAMS), unknown_key=1)


def test_config_hash_stable_and_sensitive():
    a = make("solve", params=dict(PARAMS))
    b = make("solve", params=dict(PARAMS))
    assert a.config_hash() == b.config_hash()
    c = make("solve", params=dict(PARAMS), seed=1)
    assert a.config_hash() != c.config_hash()


def test_solve_requires_params():
    with pytest.raises(ValueError):
        run(make("solve"))


def test_spectrum_task():
    rec = run(make("spectrum", k_max=3))
    assert rec.task == "spectrum"
    lam = rec.results["lambdas"]
    assert len(lam) == 3
    assert abs(lam[0] - 1.0) <= 1e-3
    assert len(rec.results["eigenfunctions"]) == 3


def test_solve_task_and_reproducibility():
    cfg = make("solve", params=dict(PARAMS))
    rec1, rec2 = run(cfg), run(cfg)
    assert rec1.results["status"] == "converged"
    assert rec1.results["mode"] == "mountain_pass"
    assert record_to_json(rec1, include_timing=False) == \
        record_to_json(rec2, include_timing=False)


def test_solve_routes_to_nonexistence_below_threshold():
    rec = run(make("solve", params={"kappa": 2.0, "omega_sq": 1.5,
                                    "functional": "zakharov"}))
    assert rec.results["mode"] == "nonexistence"
    assert rec.results["certificate"]["passed"]
    assert not rec.claim_violation


def test_multiplicity_task():
    rec = run(make("multiplicity", params={"kappa": 7.0, "omega_sq": 0.5,
                                           "functional": "zakharov"}, k=2))
    assert rec.results["count"] >= 2


def test_nonexist_task():
    rec = run(make("nonexist", params={"kappa": 2.0, "omega_sq": 1.5,
                                       "functional": "zakharov"}, trials=10))
    cert = rec.results["certificate"]
    assert cert["passed"]
    assert cert["descent_collapse_count"] == 10


def test_compare_task():
    rec = run(make("compare", params={"kappa": 2.0, "omega_sq": 1.5,
                                      "functional": "zakharov"}))
    r = rec.results
    assert r["zakharov"]["mode"] == "nonexistence"
    assert r["approx1"]["mode"] == "mountain_pass"
    assert r["approx1"]["energy"] > 0
    assert r["approx2"]["mode"] == "global_minimize"
    assert abs(r["lambda1"] - 1.0) <= 1e-3


@pytest.mark.parametrize("suite", ["identities", "spectrum", "fibering", "theorems"])
def test_verify_suites(suite):
    out = verify(suite, seed=0)
    assert out["passed"], out["items"]


def test_verify_unknown_suite():
    with pytest.raises(ValueError):
        verify("everything")


def test_sweep_kappa():
    cfg = make("sweep", params=dict(PARAMS), axis="kappa", values=[3.0, 3.5])
    records, csv = sweep(cfg)
    assert len(records) == 2
    lines = csv.strip().splitlines()
    assert lines[0] == "value,energy,grad_norm,morse_index,nehari_res,status"
    assert len(lines) == 3
    assert lines[1].startswith("3") and lines[1].endswith("converged")


def test_sweep_axis_alias_and_errors():
    cfg = make("sweep", params=dict(PARAMS), axis="omegaSq", values=[1.0])
    records, _ = sweep(cfg)
    assert records[0].results["status"] == "converged"
    with pytest.raises(ValueError):
        sweep(make("sweep", params=dict(PARAMS)))
    with pytest.raises(ValueError):
        sweep(make("sweep", params=dict(PARAMS), axis="planck", values=[1.0]))


def test_sweep_records_per_row_failures():
    # second value is below threshold: row reports nonexistence, not error
    cfg = make("sweep", params=dict(PARAMS), axis="kappa", values=[3.5, 2.0])
    records, csv = sweep(cfg)
    assert records[0].results["status"] == "converged"
    assert records[1].results["mode"] == "nonexistence"


def test_sigma_sweep_slope():
    cfg = ExperimentConfig(task="sweep",
                           domain={"dimension": 1, "extents": [PI],
                                   "bc": "navier", "n": 512},
                           params={"kappa": 1.0, "omega_sq": 0.0,
                                   "functional": "approx1"},
                           axis="sigma", values=[1.0, 0.5, 0.25, 0.125])
    records, csv = sweep(cfg)
    slope = records[0].results["loglog_slope"]
    assert -3.3 <= slope <= -2.7


def test_dilation_levels_monotone():
    spec = DomainSpec(1, (PI,), "navier", 512)
    rows = dilation_levels(spec, [1.0, 0.5, 0.25])
    levels = [r["level"] for r in rows]
    assert levels[0] < levels[1] < levels[2]


def test_bump_field_support():
    spec = DomainSpec(1, (PI,), "navier", 256)
    u = bump_field(spec)
    assert u.values.max() > 0
    x = spec.axis_nodes(0)
    outside = np.abs(x - PI / 2) >= PI / 4
    assert np.all(u.values[outside] == 0.0)


def test_write_record(tmp_path):
    rec = run(make("solve", params=dict(PARAMS)))
    paths = write_record(rec, tmp_path / "out")
    names = sorted(p.name for p in paths)
    assert names == ["report.json", "solution.csv", "solution.json"]
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["config_hash"] == rec.config_hash
    csv = (tmp_path / "out" / "solution.csv").read_text().splitlines()
    assert csv[0] == "x,u"
    assert len(csv) == 1 + 96
    # round-trip: values in the CSV match the report solution exactly
    vals = [float(line.split(",")[1]) for line in csv[1:]]
    assert vals == report["results"]["solution"]


def test_record_roundtrip_through_model():
    rec = run(make("spectrum", k_max=2))
    clone = RunRecord(**json.loads(record_to_json(rec)))
    assert clone.config_hash == rec.config_hash
    assert clone.results["lambdas"] == rec.results["lambdas"]
