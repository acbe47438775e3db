"""Command-line client for the zakharov service.

Usage:  zakharov <task> --config cfg.json [--out dir] [--seed N]
                        [--axis name --values v1,v2,...] [--server URL]

By default the service app runs in-process; --server posts the same
requests to a remote instance started with `zakharov serve`.

Exit codes: 0 success, 2 config/validation error, 3 solver failure,
4 claim violation (a theorem-level check failed).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import httpx

from .experiments import (
    EXIT_CLAIM,
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_SOLVER,
    RunRecord,
    write_record,
)

TASKS = ["spectrum", "solve", "multiplicity", "nonexist", "compare", "verify", "sweep"]


def _client(server: str | None):
    if server:
        return httpx.Client(base_url=server, timeout=600.0)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient

    from .service import app

    return TestClient(app)


def _load_config(args) -> dict:
    try:
        cfg = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG) from exc
    cfg["task"] = args.task
    if args.seed is not None:
        cfg["seed"] = args.seed
    if getattr(args, "axis", None):
        cfg["axis"] = args.axis
    if getattr(args, "values", None):
        try:
            cfg["values"] = [float(v) for v in args.values.split(",")]
        except ValueError as exc:
            print(f"error: --values must be a comma list of numbers: {exc}",
                  file=sys.stderr)
            raise SystemExit(EXIT_CONFIG) from exc
    return cfg


def _fail_from_response(resp: httpx.Response) -> int:
    try:
        detail = resp.json().get("detail", resp.text)
    except (ValueError, AttributeError):
        detail = resp.text
    print(f"error ({resp.status_code}): {detail}", file=sys.stderr)
    if resp.status_code in (400, 422):
        return EXIT_CONFIG
    return EXIT_SOLVER


def _summarize(record: dict) -> None:
    r = record["results"]
    task = record["task"]
    if task == "spectrum":
        print("lambdas:", ", ".join(f"{x:.6g}" for x in r["lambdas"]))
    elif task in ("solve",):
        print(f"mode={r.get('mode')} status={r.get('status')} "
              f"energy={r.get('energy')} morse_index={r.get('morse_index')}")
    elif task == "multiplicity":
        print(f"distinct solutions found: {r['count']}")
        for s in r["solutions"]:
            print(f"  energy={s['energy']:.8g} morse_index={s['morse_index']} "
                  f"nehari_res={s['nehari_res']:.2e}")
    elif task == "nonexist":
        c = r["certificate"]
        print(f"threshold_check={c['threshold_check']} "
              f"collapses={c['descent_collapse_count']}/{c['trials']} "
              f"projections_absent={c['projection_absent_count']}/{c['trials']} "
              f"passed={c['passed']}")
    elif task == "compare":
        for fn in ("zakharov", "approx1", "approx2"):
            d = r[fn]
            if d.get("mode") == "nonexistence":
                print(f"  {fn}: no nonzero solution (below threshold)")
            else:
                print(f"  {fn}: {d.get('mode')} status={d.get('status')} "
                      f"energy={d.get('energy')}")
    elif task == "verify":
        for item in r["items"]:
            mark = "PASS" if item["passed"] else "FAIL"
            print(f"  [{mark}] {item['name']}  {item['detail']}")
        print("suite passed:", r["passed"])


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="zakharov", description=__doc__)
    sub = parser.add_subparsers(dest="task", required=True)
    for task in TASKS:
        sp = sub.add_parser(task)
        sp.add_argument("--config", required=True)
        sp.add_argument("--out", default=None)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--server", default=None)
        if task == "sweep":
            sp.add_argument("--axis", default=None)
            sp.add_argument("--values", default=None)
    serve = sub.add_parser("serve")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    args = parser.parse_args(argv)

    if args.task == "serve":
        import uvicorn

        from .service import app

        uvicorn.run(app, host=args.host, port=args.port)
        return EXIT_OK

    cfg = _load_config(args)
    with _client(args.server) as client:
        endpoint = "/sweep" if args.task == "sweep" else "/run"
        resp = client.post(endpoint, json=cfg)
    if resp.status_code != 200:
        return _fail_from_response(resp)
    body = resp.json()

    code = EXIT_OK
    if args.task == "sweep":
        print(body["csv"], end="")
        if args.out:
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            (out / "sweep.csv").write_text(body["csv"])
            for i, rec in enumerate(body["records"]):
                write_record(RunRecord(**rec), out / f"run_{i:03d}")
            print(f"wrote {out}/sweep.csv and {len(body['records'])} run dirs")
    else:
        _summarize(body)
        if body.get("claim_violation"):
            print("CLAIM VIOLATION: a theorem-level check failed; "
                  "see the report for the offending field", file=sys.stderr)
            code = EXIT_CLAIM
        if args.out:
            paths = write_record(RunRecord(**body), args.out)
            print("wrote:", ", ".join(str(p) for p in paths))
    return code


if __name__ == "__main__":
    raise SystemExit(main())
