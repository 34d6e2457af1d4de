"""conv-roofline: plan, compare and check fast convolution algorithms.

Every subcommand writes plain data (CSV or JSON) to stdout. Exit status is
0 on success, 1 on a domain error (unknown layer, missing table cell, failed
verification, ...) and 2 on a usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable, Sequence

from .layer import ACCURACY_HEADER, VERIFY_HEADER, accuracy_report, oracle_equivalence, parse_configs
from .model import KB, PLANNED_METHODS, LayerShape, MachineSpec, Method, find_machine, load_machines, machine_catalog
from .networks import resolve_layer
from .planner import SWEEP_HEADER, SWEEP_PARAMETERS, best_tile, sweep, total_runtime
from .tables import CostTables, default_tables

DEFAULT_MACHINE = "Xeon Phi 7210@11"
DEFAULT_ACCURACY_LAYER = "1,4,4,32,3"


class DomainError(Exception):
    pass


def _write_csv(rows: Iterable[dict[str, Any]], header: Sequence[str], out) -> None:
    writer = csv.DictWriter(out, fieldnames=list(header), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _fmt(row[k]) for k in header})


def _fmt(value: Any) -> Any:
    if isinstance(value, float):
        return repr(value)
    return value


def _emit(rows: list[dict[str, Any]], header: Sequence[str], fmt: str, out) -> None:
    if fmt == "json":
        json.dump(rows, out, indent=2)
        out.write("\n")
    else:
        _write_csv(rows, header, out)


def _layer(args) -> LayerShape:
    spec = args.layer
    parts = spec.split(",")
    if len(parts) == 5:
        try:
            b, c, cp, x, r = (int(p) for p in parts)
        except ValueError:
            raise DomainError(f"malformed layer shape {spec!r}; expected B,C,C',x,r") from None
        layer = LayerShape(b, c, cp, x, r)
        return layer.replace(batch=args.batch) if args.batch else layer
    return resolve_layer(spec, args.batch)


def _machine(args) -> MachineSpec:
    name = args.machine
    if name.endswith(".json") or Path(name).is_file():
        machines = load_machines(name)
        if len(machines) != 1:
            raise DomainError(f"{name} holds {len(machines)} machines; pass a file with exactly one")
        machine = machines[0]
    else:
        machine = find_machine(name)
    if args.cache_kb is not None:
        machine = machine.with_cache(int(round(args.cache_kb * KB)))
    if args.cmr is not None:
        machine = machine.with_cmr(args.cmr)
    return machine


def _tables() -> CostTables:
    return default_tables()


def cmd_plan(args, out) -> int:
    layer, machine = _layer(args), _machine(args)
    methods = [Method.parse(args.method)] if args.method else list(PLANNED_METHODS)
    if args.m is not None and len(methods) != 1:
        raise DomainError("--m requires --method")
    plans = []
    for method in methods:
        if args.m is not None:
            plans.append(total_runtime(layer, method, args.m, machine, _tables()))
        else:
            plans.append(best_tile(layer, method, machine, args.max_winograd_tile, _tables()))
    if args.format == "csv":
        rows = []
        for plan in plans:
            for stage in plan.to_dict()["stages"]:
                rows.append({"method": plan.method.value, "m": plan.m, "t": plan.t, **stage})
        _write_csv(rows, ("method", "m", "t", "stage", "fpo", "dm", "ai", "runtime", "bound"), out)
        return 0
    doc = {
        "layer": layer.to_dict(),
        "machine": machine.to_dict(),
        "max_winograd_tile": args.max_winograd_tile,
        "plans": [p.to_dict() for p in plans],
    }
    json.dump(doc, out, indent=2)
    out.write("\n")
    return 0


PREDICT_HEADER = (
    "layer",
    "machine",
    "m_winograd",
    "m_regular_fft",
    "m_gauss_fft",
    "speedup_rfft_wino",
    "speedup_gfft_wino",
    "speedup_rfft_gfft",
)


def cmd_predict(args, out) -> int:
    layer, machine = _layer(args), _machine(args)
    wino, rfft, gfft = (
        best_tile(layer, meth, machine, args.max_winograd_tile, _tables()) for meth in PLANNED_METHODS
    )
    row = {
        "layer": args.layer,
        "machine": machine.name,
        "m_winograd": wino.m,
        "m_regular_fft": rfft.m,
        "m_gauss_fft": gfft.m,
        "speedup_rfft_wino": wino.total_runtime / rfft.total_runtime,
        "speedup_gfft_wino": wino.total_runtime / gfft.total_runtime,
        "speedup_rfft_gfft": gfft.total_runtime / rfft.total_runtime,
    }
    _emit([row], PREDICT_HEADER, args.format, out)
    return 0


def _parse_values(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise DomainError(f"malformed --values {text!r}; expected comma-separated numbers") from None
    if not values:
        raise DomainError("--values is empty")
    return values


def cmd_sweep(args, out) -> int:
    layer, machine = _layer(args), _machine(args)
    values = _parse_values(args.values)
    model_values = [v * KB for v in values] if args.param == "cache" else values
    rows = sweep(layer, machine, args.param, model_values, args.max_winograd_tile, _tables())
    records = []
    for shown, row in zip(values, rows):
        rec = row.to_dict()
        rec["param_value"] = shown
        records.append(rec)
    _emit(records, SWEEP_HEADER, args.format, out)
    return 0


def _parse_points(text: str | None):
    if not text:
        return None
    try:
        return [Fraction(p.strip()) for p in text.split(",")]
    except ValueError:
        raise DomainError(f"malformed --points {text!r}; expected e.g. 0,1,-1,2,-2,1/2,-1/2") from None


def cmd_accuracy(args, out) -> int:
    layer = _layer(args)
    configs = parse_configs(args.config) if args.config else None
    if args.method:
        method = Method.parse(args.method)
        if args.m is None:
            raise DomainError("--method requires --m for the accuracy report")
        configs = (configs or []) + [(method, args.m)]
    rows = accuracy_report(layer, configs, args.trials, args.seed, _parse_points(args.points))
    _emit([r.to_dict() for r in rows], ACCURACY_HEADER, args.format, out)
    return 0


def cmd_verify(args, out) -> int:
    checks = oracle_equivalence(args.layers, args.seed)
    _emit([c.to_dict() for c in checks], VERIFY_HEADER, args.format, out)
    failed = [c for c in checks if not c.ok]
    print(f"{len(checks) - len(failed)}/{len(checks)} comparisons within tolerance", file=sys.stderr)
    return 1 if failed else 0


MACHINE_HEADER = ("name", "gflops", "gbps", "cache_kb", "cmr")


def cmd_machines(args, out) -> int:
    _emit([mc.to_dict() for mc in machine_catalog()], MACHINE_HEADER, args.format, out)
    return 0


def cmd_dump_tables(args, out) -> int:
    tables = _tables()
    if args.format == "json":
        rows = [
            {"method": e.method.value, "m": e.m, "r": e.r, "stage": e.stage.value, "flops": e.flops, "ai": e.ai}
            for e in tables
        ]
        json.dump(rows, out, indent=2)
        out.write("\n")
    else:
        out.write(tables.to_csv())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="conv-roofline", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def fmt(p, default):
        p.add_argument("--format", choices=("csv", "json"), default=default)

    def model_opts(p, layer_default="vgg3.2"):
        p.add_argument("--layer", default=layer_default, help="catalog key (vgg3.2, alexnet2, ...), B,C,C',x,r, or a JSON file")
        p.add_argument("--batch", type=int, default=None, help="override the batch size")
        p.add_argument("--machine", default=DEFAULT_MACHINE, help="catalog name (see `machines`) or a JSON file")
        p.add_argument("--cache-kb", type=float, default=None, help="override per-core cache size")
        p.add_argument("--cmr", type=float, default=None, help="override CMR, keeping bandwidth")
        p.add_argument("--max-winograd-tile", type=int, choices=(6, 8), default=6)

    p = sub.add_parser("plan", help="per-stage runtime breakdown for each method")
    model_opts(p)
    p.add_argument("--method", default=None)
    p.add_argument("--m", type=int, default=None, help="fix the output tile size instead of searching")
    fmt(p, "json")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("predict", help="speedup ratios between the best tiles of each method")
    model_opts(p)
    fmt(p, "csv")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("sweep", help="speedups as one parameter varies")
    model_opts(p)
    p.add_argument("--param", choices=SWEEP_PARAMETERS, required=True)
    p.add_argument("--values", required=True, help="comma-separated; cache values in KB")
    fmt(p, "csv")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("accuracy", help="single-precision error of each method vs the float64 oracle")
    p.add_argument("--layer", default=DEFAULT_ACCURACY_LAYER)
    p.add_argument("--batch", type=int, default=None)
    p.add_argument("--config", action="append", default=None, metavar="METHOD:M")
    p.add_argument("--method", default=None)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--points", default=None, help="Winograd interpolation points, e.g. 0,1,-1,2,-2,1/2,-1/2")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    fmt(p, "csv")
    p.set_defaults(func=cmd_accuracy)

    p = sub.add_parser("verify", help="compare every method with the direct oracle on random small layers")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--layers", type=int, default=20)
    fmt(p, "csv")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("machines", help="list the machine catalog")
    fmt(p, "csv")
    p.set_defaults(func=cmd_machines)

    p = sub.add_parser("dump-tables", help="emit the transform cost tables")
    fmt(p, "csv")
    p.set_defaults(func=cmd_dump_tables)
    return parser


def main(argv: Sequence[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out)
    except (DomainError, KeyError, ValueError, OSError) as exc:
        message = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"conv-roofline: error: {message}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
