"""Command-line interface.

Every subcommand prints a JSON summary on stdout. Exit codes: 0 success,
1 invalid input, 2 numerical failure (divergence or a failed verification).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import convops, io, metrics, rng
from .basis import TBasisModel, init_layer_params, init_model, layer_variance, synth_weight
from .exceptions import NonFinite, TBasisError
from .fit import FitProblem, fd_check, fit
from .tensor import dtf_bytes, read_dtf, relative_error

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2

RANK_HINT = (
    "Raising the rank usually gives better results than raising the basis size; "
    "grow B once the rank saturates, and keep B <= N*R^2."
)


class VerificationFailed(Exception):
    pass


def _emit(payload: dict) -> None:
    json.dump(payload, sys.stdout, indent=2, sort_keys=True, default=float)
    sys.stdout.write("\n")


def _load_model(path) -> TBasisModel:
    with open(path, "rb") as fh:
        return io.read_model(fh)


def _load_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return read_dtf(fh)


def _network(args) -> io.NetworkDescription:
    desc = io.load_network(args.description)
    if getattr(args, "n", None):
        desc.n = args.n
    if getattr(args, "seed", None) is not None:
        desc.seed = args.seed
    return desc


def cmd_plan(args) -> dict:
    desc = _network(args)
    rows = []
    for plan in desc.plans(compressed_only=False):
        s = plan.spec
        rows.append(
            {
                "name": s.name,
                "kind": s.kind,
                "compress": s.compress,
                "d": plan.d,
                "core_count": plan.core_count,
                "natural_shape": list(s.natural_shape),
                "envelope_shape": list(plan.envelope_shape),
                "padding_waste_pct": round(100 * plan.padding_waste, 4),
            }
        )
    return {"n": desc.n, "N": desc.N, "layers": rows}


def cmd_init(args) -> dict:
    desc = _network(args)
    model = init_model(desc.plans(), desc.B, desc.R, desc.seed, desc.basis_mode)
    io.atomic_write(args.out, io.model_bytes(model))
    return {
        "model": str(args.out),
        "B": desc.B,
        "R": desc.R,
        "N": desc.N,
        "basis_mode": desc.basis_mode,
        "layers": [lp.name for lp in model.layers],
    }


def cmd_fit(args) -> dict:
    desc = _network(args)
    if args.model:
        model = _load_model(args.model)
    else:
        model = init_model(desc.plans(), desc.B, desc.R, desc.seed, desc.basis_mode)
    targets = [_load_tensor(Path(args.targets) / f"{lp.name}.dtf") for lp in model.layers]
    cfg, options = desc.fit_config(
        optimizer=args.optimizer,
        lr=args.lr,
        iterations=args.iterations,
        warmup_steps=args.warmup_steps,
        reg_weight=args.reg_weight,
    )
    problem = FitProblem(model.basis, model.layers, targets, **options)
    problem, report = fit(problem, cfg)
    io.atomic_write(args.out, io.model_bytes(TBasisModel(problem.basis, problem.layers)))
    if args.report:
        io.atomic_write(args.report, json.dumps(report.to_dict(), indent=2).encode())
    summary = {
        "model": str(args.out),
        "iterations": len(report.history),
        "best_loss": report.best_loss,
        "layer_errors": report.layer_errors,
        "aborted": report.aborted,
        "wall_time": report.wall_time,
    }
    if report.aborted:
        raise NonFinite(json.dumps(summary, default=float))
    return summary


def cmd_synth(args) -> dict:
    model = _load_model(args.model)
    W = synth_weight(model.basis, model.layer(args.layer))
    io.atomic_write(args.out, dtf_bytes(W))
    return {"layer": args.layer, "shape": list(W.shape), "out": str(args.out)}


def cmd_conv(args) -> dict:
    model = _load_model(args.model)
    lp = model.layer(args.layer)
    X = _load_tensor(args.input)
    if args.padding:
        P = args.padding
        X = np.pad(X, ((P, P), (P, P), (0, 0)))
    Y, count = convops.measure(args.path, X, model.basis, lp)
    if args.stride > 1:
        Y = np.ascontiguousarray(Y[:: args.stride, :: args.stride])
    io.atomic_write(args.out, dtf_bytes(Y))
    return {"layer": args.layer, "path": args.path, "shape": list(Y.shape), "multiply_adds": count.multiply_adds}


def cmd_stats(args) -> dict:
    source = Path(args.source)
    with open(source, "rb") as fh:
        head = fh.read(4)
    if head == io.TBM_MAGIC:
        model = _load_model(source)
        plans = [lp.plan for lp in model.layers]
        b = model.basis
        s = metrics.stats(plans, b.B, b.R, b.N, include_buffers=args.include_buffers)
    else:
        desc = _network(args)
        plans = desc.plans(compressed_only=False)
        s = metrics.stats(plans, desc.B, desc.R, desc.N, include_buffers=args.include_buffers)
    actual, bound = metrics.remark_bound(plans, s.B, s.R)
    out = s.to_dict()
    out["remark"] = {"actual": actual, "bound": bound, "constant": metrics.REMARK_CONSTANT}
    if args.table:
        sys.stderr.write(metrics.format_table(s) + "\n")
    return out


def run_verify(model: TBasisModel, seed: int = 0, samples: int = 100) -> list[dict]:
    """Invariant checks on a model; each entry has ``name``, ``value``, ``limit``, ``passed``."""
    checks = []

    def check(name, value, limit):
        checks.append({"name": name, "value": float(value), "limit": limit, "passed": bool(value <= limit)})

    gen = np.random.default_rng(rng.derive_seed(seed, "verify"))
    b = model.basis
    for lp in model.layers:
        spec, plan = lp.plan.spec, lp.plan
        side = spec.K + 5
        X = gen.standard_normal((side, side, spec.C_in))
        Y_dir, c_dir = convops.measure("direct", X, b, lp)
        Y_dec, c_dec = convops.measure("decompress", X, b, lp)
        Y_ref = convops.conv2d_reference(X, synth_weight(b, lp))
        check(f"{spec.name}: direct vs decompress", relative_error(Y_dir, Y_dec), 1e-9)
        check(f"{spec.name}: decompress vs reference", relative_error(Y_dec, Y_ref), 1e-12)
        dims = (side, side, spec.C_in, spec.C_out, spec.K, plan.n, plan.d, b.R)
        for path, c in (("direct", c_dir), ("decompress", c_dec)):
            gap = abs(c.multiply_adds - convops.flops(path, dims, spec.kind).multiply_adds)
            check(f"{spec.name}: {path} flop counter vs predictor", gap, 0)
        fresh = init_layer_params(plan, b, rng.derive_seed(seed, f"verify:{spec.name}"))
        var = float(np.var(synth_weight(b, fresh)))
        target = layer_variance(plan)
        check(f"{spec.name}: init variance relative gap", abs(var - target) / target, 0.10)
    # weight-scale targets; unit-scale ones swamp central differences in rounding noise
    targets = [gen.standard_normal(lp.plan.crop) * np.sqrt(layer_variance(lp.plan)) for lp in model.layers]
    problem = FitProblem(b, model.layers, targets)
    check("fd_check max relative error", fd_check(problem, 1e-5, samples, seed), 1e-5)
    raw = io.model_bytes(model)
    check("TBM1 round trip mismatch", float(io.model_bytes(io.model_from_bytes(raw)) != raw), 0)
    return checks


def cmd_verify(args) -> dict:
    model = _load_model(args.model)
    start = time.perf_counter()
    checks = run_verify(model, args.seed or 0, args.samples)
    passed = all(c["passed"] for c in checks)
    out = {"passed": passed, "checks": checks, "wall_time": time.perf_counter() - start}
    if not passed:
        raise VerificationFailed(json.dumps(out, default=float))
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tbasis",
        description="Shared Tensor Ring basis toolkit. " + RANK_HINT,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def desc_args(p):
        p.add_argument("description", help="JSON network description")
        p.add_argument("--n", type=int, help="tensorization base (default: max kernel size, at least 2; N = n^2)")
        p.add_argument("--seed", type=int, help="overrides the description's seed")

    p = sub.add_parser("plan", help="tensorization plan per layer")
    desc_args(p)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("init", help="initialize a model (TBM1)")
    desc_args(p)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("fit", help="fit a model to target weights")
    desc_args(p)
    p.add_argument("--targets", required=True, help="directory with <layer>.dtf files in natural shape")
    p.add_argument("--model", help="start from this TBM1 model instead of a fresh init")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--report", help="write the fit report JSON here")
    p.add_argument("--optimizer", choices=["adam", "sgd"])
    p.add_argument("--lr", type=float, help="learning rate (default 3e-3)")
    p.add_argument("--iterations", type=int)
    p.add_argument("--warmup-steps", type=int, help="linear warmup length (default 2000)")
    p.add_argument("--reg-weight", type=float, help="weight of the squared-norm penalty (default 3e-4)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("synth", help="decompress one layer to a DTF1 tensor")
    p.add_argument("model")
    p.add_argument("--layer", required=True)
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("conv", help="apply one layer to a (W, H, C) DTF1 feature map")
    p.add_argument("model")
    p.add_argument("--layer", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--path", choices=list(convops.PATHS), default="direct")
    p.add_argument("--padding", type=int, default=0, help="zero-pad the input spatially before the kernel")
    p.add_argument("--stride", type=int, default=1, help="subsample the stride-1 output")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_conv)

    p = sub.add_parser("stats", help="parameter counts and storage ratios")
    p.add_argument("source", help="JSON network description or TBM1 model")
    p.add_argument("--n", type=int)
    p.add_argument("--include-buffers", action="store_true", help="count declared buffers as parameters")
    p.add_argument("--table", action="store_true", help="also print an aligned table on stderr")
    p.set_defaults(func=cmd_stats, description=None, seed=None)

    p = sub.add_parser("verify", help="run the invariant suite on a model")
    p.add_argument("model")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=100, help="finite-difference coordinates")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "stats":
        args.description = args.source
    try:
        _emit(args.func(args))
        return EXIT_OK
    except (NonFinite, VerificationFailed) as exc:
        _emit({"error": type(exc).__name__, "detail": str(exc)})
        return EXIT_NUMERIC
    except (TBasisError, KeyError, OSError) as exc:
        _emit({"error": type(exc).__name__, "detail": str(exc)})
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
