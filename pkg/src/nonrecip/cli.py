"""Command-line front end.

Exit codes: 0 success, 1 invalid input, 2 numerical singularity,
3 optimizer did not reach its target.
"""

from __future__ import annotations

import argparse
import hashlib
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import (
    ConfigError,
    build_netlist,
    build_scheme_c,
    build_system,
    design_bounds,
    load,
    scheme_c_yaml,
)
from .design import DEFAULT_SEED_GRID, isolation_metrics, optimize_scheme_c
from .dynamics import SingularResponseError, build_dynamics, fmt, scattering, sweep
from .network import NetlistError, SingularNetworkError, connect, terminate
from .noise import output_noise
from .system import ValidationError

EXIT_OK, EXIT_INVALID, EXIT_SINGULAR, EXIT_NOT_CONVERGED = 0, 1, 2, 3


class UsageError(ValueError):
    pass


def _delta_label(units: str) -> str:
    return "delta_hz" if units == "hz" else "delta_rad_s"


def _write_outputs(out: str | None, command: str, cfg, args, files: dict[str, str]) -> None:
    if out is None:
        return
    root = Path(out)
    root.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (root / name).write_text(text)
    flags = {k: v for k, v in sorted(vars(args).items()) if k not in ("out", "func", "command")}
    manifest = {
        "command": command,
        "config_sha256": hashlib.sha256(cfg.text.encode()).hexdigest(),
        "flags": flags,
        "outputs": sorted(files),
        "version": __version__,
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _table(labels, S, ports) -> str:
    idx = [labels.index(p) for p in ports]
    width = max(8, *(len(p) + 2 for p in ports))
    lines = [f"{'out':<{width}}{'in':<{width}}{'abs':>12}{'arg_rad':>12}{'re':>12}{'im':>12}"]
    for o in idx:
        for i in idx:
            z = complex(S[o, i])
            row = (abs(z), math.atan2(z.imag, z.real) if z != 0 else 0.0, z.real, z.imag)
            lines.append(f"{labels[o]:<{width}}{labels[i]:<{width}}"
                         + "".join(f"{fmt_short(v):>12}" for v in row))
    return "\n".join(lines) + "\n"


def fmt_short(x: float) -> str:
    s = f"{x:.6f}"
    return s[1:] if s.startswith("-") and not s.strip("-0.") else s


def _matrix_csv(labels, S, ports) -> str:
    buf = io.StringIO()
    buf.write("out,in,re,im,abs,arg_rad\n")
    for o in ports:
        for i in ports:
            z = complex(S[labels.index(o), labels.index(i)])
            arg = math.atan2(z.imag, z.real) if z != 0 else 0.0
            buf.write(",".join([o, i, fmt(z.real), fmt(z.imag), fmt(abs(z)), fmt(arg)]) + "\n")
    return buf.getvalue()


def _select_ports(requested, available, default):
    if not requested:
        return list(default)
    for p in requested:
        if p not in available:
            raise UsageError(f"unknown port {p!r}; available: {', '.join(available)}")
    return list(requested)


def cmd_simulate(args) -> int:
    cfg = load(args.config)
    system = build_system(cfg)
    S = scattering(system, args.delta * cfg.scale)
    ports = _select_ports(args.ports, S.ports, S.ports)
    header = f"# delta = {fmt_short(args.delta)} {cfg.units}\n"
    text = header + _table(list(S.ports), S.S, ports)
    sys.stdout.write(text)
    _write_outputs(args.out, "simulate", cfg, args,
                   {"smatrix.txt": text, "smatrix.csv": _matrix_csv(list(S.ports), S.S, ports)})
    return EXIT_OK


def _parse_baths(items) -> dict[str, float]:
    baths = {}
    for item in items or []:
        label, _, value = item.partition("=")
        try:
            baths[label] = float(value)
        except ValueError:
            raise UsageError(f"--bath expects LABEL=OCCUPANCY, got {item!r}") from None
    return baths


def cmd_sweep(args) -> int:
    cfg = load(args.config)
    if args.points < 2:
        raise UsageError(f"--points must be at least 2, got {args.points}")
    system = build_system(cfg)
    dyn = build_dynamics(system)
    curve = sweep(dyn, args.delta_min * cfg.scale, args.delta_max * cfg.scale, args.points)
    external = curve.ports[: curve.n_external]
    ports = _select_ports(args.ports, curve.ports, external)
    pairs = [(o, i) for o in ports for i in ports]
    buf = io.StringIO()
    curve.to_csv(buf, pairs, delta_scale=cfg.scale, delta_label=_delta_label(cfg.units))
    response = buf.getvalue()
    files = {}
    if args.noise:
        baths = _parse_baths(args.bath)
        spectra = [output_noise(dyn, baths, curve.delta, p) for p in ports]
        rows = response.splitlines()
        merged = [rows[0] + "," + ",".join(f"N[{p}]" for p in ports)]
        for n, row in enumerate(rows[1:]):
            merged.append(row + "," + ",".join(fmt(s.total[n]) for s in spectra))
        response = "\n".join(merged) + "\n"
        for s in spectra:
            nb = io.StringIO()
            s.to_csv(nb, delta_scale=cfg.scale, delta_label=_delta_label(cfg.units))
            files[f"noise_{s.port.replace(':', '_')}.csv"] = nb.getvalue()
    files["response.csv"] = response
    if args.threshold_db is not None and len(external) >= 2:
        m = isolation_metrics(curve, args.threshold_db, (external[1], external[0]))
        files["metrics.json"] = json.dumps({
            "forward": [external[1], external[0]],
            "depth_db": "inf" if math.isinf(m.depth_db) else m.depth_db,
            "bandwidth": m.bandwidth / cfg.scale,
            "insertion_loss_db": m.insertion_loss_db,
            "threshold_db": args.threshold_db,
            "units": cfg.units,
        }, indent=2, sort_keys=True) + "\n"
    if args.out is None:
        sys.stdout.write(response)
        if "metrics.json" in files:
            sys.stderr.write(files["metrics.json"])
    _write_outputs(args.out, "sweep", cfg, args, files)
    return EXIT_OK


def _seed_grid(text: str) -> tuple[int, int]:
    try:
        a, b = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed grid must look like 36x24, got {text!r}") from None
    if a < 1 or b < 1:
        raise argparse.ArgumentTypeError("seed grid sizes must be positive")
    return a, b


def cmd_optimize(args) -> int:
    cfg = load(args.config)
    if cfg.kind != "scheme_c":
        raise UsageError(f"optimize needs a 'kind: scheme_c' config, got {cfg.kind!r}")
    fixed = build_scheme_c(cfg)
    bounds = design_bounds(cfg)
    data = cfg.data
    target = args.target_db if args.target_db is not None else float(data.get("target_db", 20.0))
    budget = args.loss_budget_db if args.loss_budget_db is not None else float(data.get("loss_budget_db", 3.0))
    objective = args.objective or data.get("objective", "depth")
    direction = data.get("direction", "forward")
    span = None if args.bandwidth_span is None else args.bandwidth_span * cfg.scale
    try:
        result = optimize_scheme_c(fixed, bounds, target, budget, direction, objective,
                                   seed_grid=args.seed_grid, threshold_db=args.threshold_db,
                                   bandwidth_span=span)
    except ValueError as exc:
        report = json.dumps({"converged": False, "status": f"failed: {exc}"}, indent=2, sort_keys=True) + "\n"
        sys.stdout.write(report)
        _write_outputs(args.out, "optimize", cfg, args, {"design.json": report})
        return EXIT_INVALID
    report = result.to_json(scale=cfg.scale, units=cfg.units)
    sys.stdout.write(report)
    _write_outputs(args.out, "optimize", cfg, args,
                   {"design.json": report, "design.yaml": scheme_c_yaml(result.scheme(), cfg.units)})
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def cmd_compose(args) -> int:
    cfg = load(args.config)
    netlist = build_netlist(cfg)
    comp = connect(netlist)
    if args.terminate:
        comp = terminate(comp, args.terminate)
    ports = list(comp.ports)
    text = f"# {comp.name}\n" + _table(ports, comp.S, ports)
    sys.stdout.write(text)
    _write_outputs(args.out, "compose", cfg, args,
                   {"smatrix.txt": text, "smatrix.csv": _matrix_csv(ports, comp.S, ports)})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nonrecip", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="print the full scattering matrix at one detuning")
    p.add_argument("--config", required=True)
    p.add_argument("--delta", type=float, default=0.0, help="probe detuning, config units")
    p.add_argument("--ports", nargs="+")
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="scattering (and noise) versus detuning as CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--delta-min", type=float, required=True)
    p.add_argument("--delta-max", type=float, required=True)
    p.add_argument("--points", type=int, default=1001)
    p.add_argument("--ports", nargs="+")
    p.add_argument("--noise", action="store_true", help="append emitted noise columns")
    p.add_argument("--bath", action="append", metavar="LABEL=N", help="override a port occupancy")
    p.add_argument("--threshold-db", type=float, help="also report isolation metrics")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("optimize", help="synthesize a two-mechanical-mode isolator")
    p.add_argument("--config", required=True)
    p.add_argument("--target-db", type=float)
    p.add_argument("--loss-budget-db", type=float)
    p.add_argument("--objective", choices=("depth", "loss"))
    p.add_argument("--seed-grid", type=_seed_grid, default=DEFAULT_SEED_GRID)
    p.add_argument("--threshold-db", type=float, default=20.0)
    p.add_argument("--bandwidth-span", type=float, help="half-width of the bandwidth sweep, config units")
    p.add_argument("--out")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("compose", help="reduce a netlist of ideal components")
    p.add_argument("--config", required=True)
    p.add_argument("--terminate", nargs="+", metavar="PORT")
    p.add_argument("--out")
    p.set_defaults(func=cmd_compose)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValidationError, NetlistError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (SingularResponseError, SingularNetworkError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    except (KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
