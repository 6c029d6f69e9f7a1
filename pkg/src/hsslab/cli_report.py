"""Command-line client: verify, capacities, flow, report and serve.

Exit codes: 0 when every check passes, 1 on a failed check, 2 on usage or
domain errors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from pydantic import ValidationError

from .errors import DomainError, NumericalError, UsageError
from .service import (
    CapacityRequest,
    FlowRequest,
    VerificationReport,
    VerifyRequest,
    merge_reports,
    run_capacities,
    run_flow,
    run_verify,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

_CASTS = {
    "model": str, "suite": str, "samples": int, "seed": int, "tol": float, "fd_step": float,
    "out": str, "ratio": float, "twist": float, "rho": float, "speed": float, "dt": float,
    "steps": int, "csv": str, "sample_every": int,
}


def read_config(path: str) -> dict:
    """key=value lines; '#' starts a comment; 'tol.<check>' sets one check's tolerance."""
    cfg: dict = {"tolerances": {}}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}")
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, val = (p.strip() for p in line.split("=", 1))
        key = key.replace("-", "_")
        try:
            if key.startswith("tol."):
                cfg["tolerances"][key[4:]] = float(val)
            elif key in _CASTS:
                cfg[key] = _CASTS[key](val)
            else:
                raise UsageError(f"{path}:{lineno}: unknown key '{key}'")
        except ValueError:
            raise UsageError(f"{path}:{lineno}: bad value for '{key}'")
    return cfg


def _merged(args, keys) -> dict:
    """Config-file values overridden by any flag given on the command line."""
    cfg = read_config(args.config) if getattr(args, "config", None) else {"tolerances": {}}
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    return cfg


def _require(cfg, key):
    if cfg.get(key) is None:
        raise UsageError(f"missing required option --{key.replace('_', '-')}")
    return cfg[key]


def _fmt(x) -> str:
    if x is None:
        return "nan"
    return f"{x:.3e}"


def _print_report(rep: VerificationReport) -> None:
    for r in rep.records:
        flag = "PASS" if r.passed else "FAIL"
        print(f"{flag}  {r.name:<40} max={_fmt(r.max_residual)}  tol={r.tolerance:.1e}  n={r.n_samples}")
    print(f"{'PASS' if rep.passed else 'FAIL'}  {rep.model} / {rep.suite}")


def _write_json(path: str, rep: VerificationReport) -> None:
    Path(path).write_text(json.dumps(rep.model_dump(), indent=2, sort_keys=True, allow_nan=False) + "\n")


def cmd_verify(args) -> int:
    cfg = _merged(args, ("model", "suite", "samples", "seed", "tol", "fd_step", "out"))
    req = VerifyRequest(model=_require(cfg, "model"), suite=cfg.get("suite", "all"),
                        samples=cfg.get("samples", 20), seed=cfg.get("seed", 0), tol=cfg.get("tol"),
                        tolerances=cfg["tolerances"], fd_step=cfg.get("fd_step"))
    rep = run_verify(req)
    _print_report(rep)
    if cfg.get("out"):
        _write_json(cfg["out"], rep)
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_capacities(args) -> int:
    cfg = _merged(args, ("model", "ratio", "twist", "rho"))
    table = run_capacities(CapacityRequest(model=_require(cfg, "model"), ratio=cfg.get("ratio"),
                                           twist=cfg.get("twist"), rho=cfg.get("rho")))
    print(f"{'quantity':<24} value")
    for row in table.rows:
        if row.value is not None:
            txt = f"{row.value:.12g}  ({row.value / math.pi:.12g} pi)"
        elif row.parts is not None:
            txt = "  ".join(f"{k}={v:.12g}" for k, v in row.parts.items())
        else:
            txt = f"[{row.lower:.12g}, {row.upper:.12g}]"
        print(f"{row.quantity:<24} {txt}")
    if not table.rows:
        print("(no quantities for these parameters)")
    return EXIT_OK


def cmd_flow(args) -> int:
    cfg = _merged(args, ("model", "speed", "twist", "dt", "steps", "csv", "sample_every"))
    req = FlowRequest(model=_require(cfg, "model"), speed=cfg.get("speed", 1.0), twist=cfg.get("twist", 0.0),
                      dt=cfg.get("dt", 1e-3), steps=cfg.get("steps", 1000), sample_every=cfg.get("sample_every", 1))
    try:
        summary, rec = run_flow(req)
    except NumericalError as exc:
        print(f"flow aborted: {exc}", file=sys.stderr)
        return EXIT_FAIL
    if cfg.get("csv"):
        rec.write_csv(cfg["csv"])
    for k, v in summary.model_dump().items():
        print(f"{k:<18} {v}")
    return EXIT_OK


def cmd_report(args) -> int:
    reps = []
    for p in args.inputs:
        try:
            reps.append(VerificationReport.model_validate_json(Path(p).read_text()))
        except OSError as exc:
            raise UsageError(f"cannot read report: {exc}")
    merged = merge_reports(reps)
    _print_report(merged)
    if args.out:
        _write_json(args.out, merged)
    return EXIT_OK if merged.passed else EXIT_FAIL


def cmd_serve(args) -> int:
    try:
        import uvicorn
    except ImportError:
        raise UsageError("serving needs uvicorn (pip install 'artifact[serve]')")
    uvicorn.run("hsslab.service:app", host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hss-lab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run verification suites and write a JSON report")
    v.add_argument("--model")
    v.add_argument("--suite", help="maps, moments, forms, dynamics or all")
    v.add_argument("--samples", type=int)
    v.add_argument("--seed", type=int)
    v.add_argument("--tol", type=float, help="override every check tolerance")
    v.add_argument("--fd-step", dest="fd_step", type=float)
    v.add_argument("--out")
    v.add_argument("--config", help="key=value file; flags take precedence")
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("capacities", help="print the capacity table of a model")
    c.add_argument("--model")
    c.add_argument("--ratio", type=float)
    c.add_argument("--twist", type=float)
    c.add_argument("--rho", type=float)
    c.add_argument("--config")
    c.set_defaults(func=cmd_capacities)

    f = sub.add_parser("flow", help="integrate a magnetic geodesic and dump it as CSV")
    f.add_argument("--model")
    f.add_argument("--speed", type=float)
    f.add_argument("--twist", type=float)
    f.add_argument("--dt", type=float)
    f.add_argument("--steps", type=int)
    f.add_argument("--sample-every", dest="sample_every", type=int)
    f.add_argument("--csv")
    f.add_argument("--config")
    f.set_defaults(func=cmd_flow)

    r = sub.add_parser("report", help="merge JSON reports")
    r.add_argument("inputs", nargs="+")
    r.add_argument("--out")
    r.set_defaults(func=cmd_report)

    s = sub.add_parser("serve", help="run the HTTP service")
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=8000)
    s.set_defaults(func=cmd_serve)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except (UsageError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as exc:
        msgs = "; ".join(f"{'.'.join(map(str, e['loc']))}: {e['msg']}" for e in exc.errors())
        print(f"error: {msgs}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
