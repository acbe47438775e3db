"""Experiment configuration, dispatch, persistence and claim verification.

A single JSON config describes domain, model parameters and a task;
`run` dispatches it and returns a RunRecord whose serialization is
bitwise-reproducible for a fixed config and seed (timing excluded).
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field as PydField

from . import __version__
from .energy import (
    dilate,
    energy,
    energy_identity_gap,
    fibering_project,
    gradient,
)
from . import solvers as so
from .energy import ModelParams
from .grids import DomainSpec, Field, build_operators, measure
from .spectrum import solve_spectrum, Spectrum

__all__ = [
    "DomainConfig",
    "ParamsConfig",
    "ExperimentConfig",
    "RunRecord",
    "run",
    "sweep",
    "verify",
    "record_to_json",
    "write_record",
    "dilation_levels",
    "bump_field",
]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_CLAIM = 4


class DomainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    dimension: int = 1
    extents: list[float] = PydField(default_factory=lambda: [math.pi])
    bc: Literal["dirichlet", "navier"] = "navier"
    n: int = 256

    def to_spec(self) -> DomainSpec:
        return DomainSpec(self.dimension, tuple(self.extents), self.bc, self.n)


class ParamsConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    kappa: float
    omega_sq: float = 0.0
    functional: Literal["zakharov", "approx1", "approx2"] = "zakharov"

    def to_params(self) -> ModelParams:
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        return ModelParams(self.kappa, self.omega_sq, self.functional)


class ToleranceConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    tol: float = 1e-8
    coarse_tol: float = 1e-4
    zero_floor: float = 1e-6
    distinct_floor: float = 0.01


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    task: Literal["spectrum", "solve", "multiplicity", "nonexist",
                  "compare", "verify", "sweep"]
    domain: DomainConfig = PydField(default_factory=DomainConfig)
    params: Optional[ParamsConfig] = None
    seed: int = 0
    k_max: int = 6          # spectrum task
    k: int = 2              # multiplicity task
    trials: int = 50        # nonexist task
    suite: Literal["identities", "spectrum", "fibering", "theorems"] = "identities"
    axis: Optional[str] = None              # sweep task
    values: Optional[list[float]] = None    # sweep task
    tolerances: ToleranceConfig = PydField(default_factory=ToleranceConfig)
    output_dir: Optional[str] = None

    def solver_cfg(self) -> so.SolverCfg:
        t = self.tolerances
        return so.SolverCfg(tol=t.tol, coarse_tol=t.coarse_tol,
                            zero_floor=t.zero_floor,
                            distinct_floor=t.distinct_floor, seed=self.seed)

    def canonical(self) -> dict:
        return json.loads(self.model_dump_json())

    def config_hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True,
                          separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()


class RunRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")
    task: str
    config: dict
    config_hash: str
    version: str
    results: dict
    wall_time: float
    claim_violation: bool = False


def _san(x):
    """JSON-safe conversion (numpy scalars/arrays, NaN -> None)."""
    if isinstance(x, dict):
        return {k: _san(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_san(v) for v in x]
    if isinstance(x, np.ndarray):
        return _san(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _solve_report_dict(rep: so.SolveReport, ops, include_solution: bool = True) -> dict:
    out = {
        "status": rep.status,
        "energy": rep.energy,
        "grad_norm": rep.grad_norm,
        "nehari_res": rep.nehari_res,
        "morse_index": rep.morse_index,
        "iterations": rep.iterations,
        "level_trace": rep.level_trace,
        "x_norm": so.x_norm(rep.solution.values, ops),
        "extras": rep.extras,
    }
    if include_solution:
        out["solution"] = rep.solution.values
    return _san(out)


def _cert_dict(cert: so.NonexistenceCertificate) -> dict:
    return _san({
        "threshold_check": cert.threshold_check,
        "lambda1": cert.lambda1,
        "margin": cert.margin,
        "kappa_minus_omega_sq": cert.kappa_minus_omega_sq,
        "trials": cert.trials,
        "descent_collapse_count": cert.descent_collapse_count,
        "projection_absent_count": cert.projection_absent_count,
        "violations": cert.violations,
        "passed": cert.passed,
    })


def _solve_one(p: ModelParams, ops, spectrum: Spectrum, cfg: so.SolverCfg) -> dict:
    """Solve dispatch used by solve / compare / sweep rows."""
    if p.functional == "approx2":
        rep = so.global_minimize_e2(p, ops, spectrum, cfg)
        d = _solve_report_dict(rep, ops)
        d["mode"] = "global_minimize"
        return d
    try:
        rep = so.mountain_pass_solve(p, ops, spectrum, cfg)
    except so.BelowThresholdError as exc:
        cert = so.nonexistence_certificate(p, ops, spectrum, trials=20, cfg=cfg)
        return {"mode": "nonexistence", "reason": str(exc),
                "certificate": _cert_dict(cert), "status": "zero_collapse"}
    d = _solve_report_dict(rep, ops)
    d["mode"] = "mountain_pass"
    return d


def run(config: ExperimentConfig) -> RunRecord:
    t0 = time.perf_counter()
    spec = config.domain.to_spec()
    ops = build_operators(spec)
    cfg = config.solver_cfg()
    claim_violation = False

    if config.task == "spectrum":
        spectrum = solve_spectrum(ops, config.k_max)
        results = _san({
            "lambdas": spectrum.lambdas,
            "gap_diagnostic": spectrum.gap_diagnostic(),
            "eigenfunctions": [pair.phi.values for pair in spectrum.pairs],
        })
    elif config.task == "solve":
        p = _require_params(config)
        spectrum = solve_spectrum(ops, min(6, spec.num_nodes - 1))
        results = _solve_one(p, ops, spectrum, cfg)
        cert = results.get("certificate")
        if cert and cert["violations"]:
            claim_violation = True
    elif config.task == "multiplicity":
        p = _require_params(config)
        spectrum = solve_spectrum(ops, config.k + 1)
        reports = so.multiplicity_search(p, ops, spectrum, config.k, cfg)
        results = {"count": len(reports),
                   "solutions": [_solve_report_dict(r, ops) for r in reports]}
    elif config.task == "nonexist":
        p = _require_params(config)
        spectrum = solve_spectrum(ops, 1)
        cert = so.nonexistence_certificate(p, ops, spectrum, config.trials, cfg)
        results = {"certificate": _cert_dict(cert)}
        if cert.violations:
            claim_violation = True
    elif config.task == "compare":
        p = _require_params(config)
        spectrum = solve_spectrum(ops, min(6, spec.num_nodes - 1))
        results = {}
        for fn in ("zakharov", "approx1", "approx2"):
            pf = ModelParams(p.kappa, p.omega_sq, fn)
            d = _solve_one(pf, ops, spectrum, cfg)
            d.pop("solution", None)
            d.pop("level_trace", None)
            results[fn] = d
            cert = d.get("certificate")
            if cert and cert["violations"]:
                claim_violation = True
        results["lambda1"] = spectrum.pairs[0].lam
        results["kappa_minus_omega_sq"] = p.kappa - p.omega_sq
        results = _san(results)
    elif config.task == "verify":
        results = verify(config.suite, seed=config.seed)
    elif config.task == "sweep":
        raise ValueError("use sweep() for the sweep task")
    else:  # pragma: no cover
        raise ValueError(f"unknown task {config.task}")

    return RunRecord(
        task=config.task,
        config=config.canonical(),
        config_hash=config.config_hash(),
        version=__version__,
        results=results,
        wall_time=time.perf_counter() - t0,
        claim_violation=claim_violation,
    )


def _require_params(config: ExperimentConfig) -> ModelParams:
    if config.params is None:
        raise ValueError(f"task '{config.task}' requires a params block")
    return config.params.to_params()


_AXIS_ALIASES = {"omegaSq": "omega_sq", "omega_sq": "omega_sq",
                 "kappa": "kappa", "n": "n", "sigma": "sigma"}


def sweep(config: ExperimentConfig, axis: str | None = None,
          values: list[float] | None = None) -> tuple[list[RunRecord], str]:
    """One solve per value along an axis; returns records and a CSV summary.

    Rows run concurrently in a bounded pool (ZAKHAROV_THREADS caps it);
    the summary is merged deterministically in input order.  Partial
    failures are recorded per-row and do not abort the sweep.
    """
    axis = axis or config.axis
    values = values if values is not None else config.values
    if axis is None or not values:
        raise ValueError("sweep requires axis and values")
    if axis not in _AXIS_ALIASES:
        raise ValueError(f"axis must be one of {sorted(set(_AXIS_ALIASES))}")
    axis = _AXIS_ALIASES[axis]

    if axis == "sigma":
        return _sigma_sweep(config, values)

    def one(value) -> RunRecord:
        c = config.model_copy(deep=True)
        c.task = "solve"
        c.axis, c.values = None, None
        if axis == "n":
            c.domain.n = int(value)
        elif axis == "kappa":
            assert c.params is not None
            c.params.kappa = float(value)
        else:
            assert c.params is not None
            c.params.omega_sq = float(value)
        try:
            return run(c)
        except Exception as exc:  # noqa: BLE001 - per-row failure is recorded
            return RunRecord(task="solve", config=c.canonical(),
                             config_hash=c.config_hash(), version=__version__,
                             results={"status": "error", "message": str(exc)},
                             wall_time=0.0)

    workers = int(os.environ.get("ZAKHAROV_THREADS", os.cpu_count() or 1))
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        records = list(pool.map(one, values))

    lines = ["value,energy,grad_norm,morse_index,nehari_res,status"]
    for value, rec in zip(values, records):
        r = rec.results
        lines.append(",".join([
            _csv_num(value),
            _csv_num(r.get("energy")),
            _csv_num(r.get("grad_norm")),
            _csv_num(r.get("morse_index")),
            _csv_num(r.get("nehari_res")),
            str(r.get("status", "error")),
        ]))
    return records, "\n".join(lines) + "\n"


def _csv_num(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def bump_field(spec: DomainSpec, radius_frac: float = 0.25) -> Field:
    """Smooth compactly supported bump centered in the box."""
    if spec.dimension != 1:
        raise ValueError("bump_field is 1D")
    L = spec.extents[0]
    x = spec.axis_nodes(0)
    r = (x - L / 2) / (radius_frac * L)
    vals = np.where(np.abs(r) < 1, np.exp(1.0 - 1.0 / np.maximum(1 - r * r, 1e-300)), 0.0)
    return Field(spec, vals)


def dilation_levels(spec: DomainSpec, sigmas: list[float],
                    p: ModelParams | None = None) -> list[dict]:
    """Nehari levels of the quartic truncation along the dilation family.

    The level grows like sigma^(N-4) as the bump support shrinks, which
    is what makes those levels unbounded.
    """
    p = p or ModelParams(1.0, 0.0, "approx1")
    if p.functional != "approx1":
        raise ValueError("dilation levels are defined for approx1")
    ops = build_operators(spec)
    u = bump_field(spec)
    out = []
    for sigma in sigmas:
        u_s = dilate(u, float(sigma))
        pr = fibering_project(u_s, p, ops)
        if pr.t_root is None:
            out.append({"sigma": float(sigma), "level": None})
            continue
        level = energy(Field(spec, pr.t_root * u_s.values), p, ops)
        out.append({"sigma": float(sigma), "t_u": pr.t_root, "level": level})
    return out


def _sigma_sweep(config: ExperimentConfig, sigmas: list[float]):
    spec = config.domain.to_spec()
    p = config.params.to_params() if config.params else ModelParams(1.0, 0.0, "approx1")
    rows = dilation_levels(spec, sigmas, p)
    results = {"rows": _san(rows)}
    if all(r.get("level") for r in rows) and len(rows) >= 2:
        lg_s = np.log([r["sigma"] for r in rows])
        lg_e = np.log([r["level"] for r in rows])
        slope = float(np.polyfit(lg_s, lg_e, 1)[0])
        results["loglog_slope"] = slope
    rec = RunRecord(task="sweep", config=config.canonical(),
                    config_hash=config.config_hash(), version=__version__,
                    results=results, wall_time=0.0)
    lines = ["value,energy,grad_norm,morse_index,nehari_res,status"]
    for r in rows:
        lines.append(f"{_csv_num(r['sigma'])},{_csv_num(r.get('level'))},,,,ok")
    return [rec], "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# verification suites


def _random_smooth_fields(ops, count: int, rng) -> list[Field]:
    import scipy.sparse.linalg as spla

    lu = spla.splu(ops.B.tocsc())
    out = []
    for _ in range(count):
        raw = lu.solve(rng.standard_normal(ops.spec.num_nodes))
        raw /= so.x_norm(raw, ops) + 1e-300
        out.append(Field(ops.spec, raw * 10 ** rng.uniform(-0.5, 0.5)))
    return out


def verify(suite: str, seed: int = 0) -> dict:
    """Run one named invariant suite; machine-readable pass/fail items."""
    items: list[dict] = []

    def check(name: str, passed: bool, detail: str = ""):
        items.append({"name": name, "passed": bool(passed), "detail": detail})

    if suite == "identities":
        spec = DomainSpec(1, (math.pi,), "navier", 128)
        ops = build_operators(spec)
        rng = np.random.default_rng(seed)
        p = ModelParams(2.0, 0.7, "zakharov")
        worst = 0.0
        for u in _random_smooth_fields(ops, 20, rng):
            ident = energy_identity_gap(u, p, ops)
            rel = ident.gap / (1.0 + abs(energy(u, p, ops)))
            worst = max(worst, rel)
        check("energy_identity_gap", worst <= 1e-12, f"worst {worst:.2e}")
        u = _random_smooth_fields(ops, 1, rng)[0]
        g = gradient(u, p, ops)
        v = rng.standard_normal(spec.num_nodes)
        eps = 1e-5
        fd = (energy(Field(spec, u.values + eps * v), p, ops)
              - energy(Field(spec, u.values - eps * v), p, ops)) / (2 * eps)
        rel = abs(fd - g @ v) / (abs(fd) + 1e-300)
        check("gradient_consistency", rel <= 1e-6, f"rel {rel:.2e}")
    elif suite == "spectrum":
        ops = build_operators(DomainSpec(1, (math.pi,), "navier", 1024))
        lam = solve_spectrum(ops, 3).lambdas
        err = np.abs(lam - np.array([1.0, 4.0, 9.0])).max()
        check("navier_lambda_k", err <= 1e-3, f"max err {err:.2e}")
        ops_d = build_operators(DomainSpec(1, (math.pi,), "dirichlet", 1024))
        lam1 = solve_spectrum(ops_d, 1).lambdas[0]
        check("dirichlet_lambda1", abs(lam1 - 4.0) <= 1e-3, f"lambda1 {lam1:.6f}")
    elif suite == "fibering":
        spec = DomainSpec(1, (math.pi,), "navier", 512)
        ops = build_operators(spec)
        u = Field.from_function(spec, np.sin)
        p1 = ModelParams(1.0, 1.0, "approx1")
        pr = fibering_project(u, p1, ops)
        err = abs(pr.t_root - math.sqrt(8.0 / 3.0))
        check("closed_form_tu", err <= 1e-3, f"err {err:.2e}")
        pz = ModelParams(2.0, 1.5, "zakharov")
        prz = fibering_project(u, pz, ops)
        check("below_threshold_absent", prz.t_root is None,
              f"h_value {prz.h_value:.3g}")
    elif suite == "theorems":
        spec = DomainSpec(1, (math.pi,), "navier", 256)
        ops = build_operators(spec)
        spectrum = solve_spectrum(ops, 3)
        cfg = so.SolverCfg(seed=seed)
        # canonical contrast triple: below the exponential threshold
        pz = ModelParams(2.0, 1.5, "zakharov")
        cert = so.nonexistence_certificate(pz, ops, spectrum, trials=10, cfg=cfg)
        check("zakharov_nonexistence", cert.passed,
              f"collapses {cert.descent_collapse_count}/{cert.trials}")
        p1 = ModelParams(2.0, 1.5, "approx1")
        rep1 = so.mountain_pass_solve(p1, ops, spectrum, cfg)
        check("approx1_exists_positive",
              rep1.status == "converged" and rep1.energy > 0,
              f"E1 {rep1.energy:.6g}")
        p2 = ModelParams(4.0, 0.0, "approx2")
        rep2 = so.global_minimize_e2(p2, ops, spectrum, cfg)
        check("approx2_negative_minimizer",
              rep2.status == "converged" and rep2.energy < 0
              and rep2.morse_index == 0,
              f"E2 {rep2.energy:.6g} index {rep2.morse_index}")
        # existence window: converged saddle with the level bound
        pz2 = ModelParams(3.5, 1.0, "zakharov")
        repz = so.mountain_pass_solve(pz2, ops, spectrum, cfg)
        bound = 0.5 * pz2.kappa * measure(spec)
        check("zakharov_ground_state",
              repz.status == "converged" and 0 < repz.energy < bound
              and repz.morse_index >= 1,
              f"E {repz.energy:.6g} index {repz.morse_index}")
    else:
        raise ValueError(f"unknown suite {suite}")

    return {"suite": suite, "items": items,
            "passed": all(i["passed"] for i in items)}


# ---------------------------------------------------------------------------
# persistence


def record_to_json(record: RunRecord, include_timing: bool = True) -> str:
    d = record.model_dump()
    if not include_timing:
        d.pop("wall_time", None)
    return json.dumps(d, sort_keys=True, indent=1) + "\n"


def _field_csv(values: list[float], spec: DomainSpec) -> str:
    lines = []
    if spec.dimension == 1:
        lines.append("x,u")
        for x, u in zip(spec.axis_nodes(0), values):
            lines.append(f"{x!r},{u!r}")
    else:
        lines.append("x,y,u")
        X, Y = spec.meshgrid()
        for x, y, u in zip(X, Y, values):
            lines.append(f"{x!r},{y!r},{u!r}")
    return "\n".join(lines) + "\n"


def write_record(record: RunRecord, out_dir: str | Path) -> list[Path]:
    """Persist a record: report.json plus CSV field dumps with sidecars."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    path = out / "report.json"
    path.write_text(record_to_json(record))
    written.append(path)
    spec = DomainConfig(**record.config["domain"]).to_spec()

    def dump_solution(values, stem, meta):
        csv_path = out / f"{stem}.csv"
        csv_path.write_text(_field_csv(values, spec))
        sidecar = out / f"{stem}.json"
        sidecar.write_text(json.dumps(_san(meta), sort_keys=True, indent=1) + "\n")
        written.extend([csv_path, sidecar])

    r = record.results
    if "solution" in r:
        meta = {k: v for k, v in r.items() if k not in ("solution", "level_trace")}
        meta.update({"domain": record.config["domain"],
                     "params": record.config.get("params"),
                     "config_hash": record.config_hash})
        dump_solution(r["solution"], "solution", meta)
    for i, sol in enumerate(r.get("solutions", [])):
        if "solution" in sol:
            meta = {k: v for k, v in sol.items() if k != "solution"}
            meta.update({"domain": record.config["domain"],
                         "params": record.config.get("params"),
                         "config_hash": record.config_hash})
            dump_solution(sol["solution"], f"solution_{i:03d}", meta)
    for i, phi in enumerate(r.get("eigenfunctions", [])):
        dump_solution(phi, f"eigenfunction_{i + 1:03d}",
                      {"lambda": r["lambdas"][i],
                       "domain": record.config["domain"],
                       "config_hash": record.config_hash})
    return written
