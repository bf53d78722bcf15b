"""Command-line entry point.

Exit codes: 0 success, 1 validation failure, 2 usage or configuration
error (including missing input paths), 3 I/O error while reading or
writing a file that exists or is being created.

A ``--config`` JSON file, when given, overrides the matching flags.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import analysis as an
from .conversion import CalibrationError, calibrate, convert, snn_forward
from .files import (
    LoadError,
    fixture_path,
    load_calibration,
    load_dataset,
    load_model,
    load_network,
    save_calibration,
    save_model,
)
from .network import NetworkError

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _existing(path) -> Path:
    """Resolve ``fixture:<name>`` shorthands and require the file to exist."""
    if path is None:
        raise UsageError("missing required path")
    text = str(path)
    p = fixture_path(text[len("fixture:") :]) if text.startswith("fixture:") else Path(text)
    if not p.exists():
        raise UsageError(f"no such file: {text}")
    return p


SNN_DEFAULTS = {"horizon": 8, "precharge": 1, "alpha": 0.5}


def _add_snn(p: argparse.ArgumentParser) -> None:
    # None means: take the value stored in --model, else SNN_DEFAULTS
    p.add_argument("--T", dest="horizon", type=int, help="timesteps including pre-charge (default 8)")
    p.add_argument("--P", dest="precharge", type=int, help="pre-charge length (default 1)")
    p.add_argument("--alpha", type=float, help="predictive threshold ratio (default 0.5)")


def _snn_params(args, base: dict | None = None) -> dict:
    base = base or SNN_DEFAULTS
    return {k: base[k] if getattr(args, k) is None else getattr(args, k) for k in SNN_DEFAULTS}


def _add_model_source(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", help="converted model file (from `convert`)")
    p.add_argument("--network", help="network file; used with --calibration instead of --model")
    p.add_argument("--calibration", help="calibration file")
    _add_snn(p)
    p.add_argument("--dataset", help="dataset file with x (and optionally y)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="css-snn", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="per-layer thresholds from activation percentiles")
    p.add_argument("--network", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--percentile", type=float, default=99.99)
    p.add_argument("--batches", type=int, default=4, help="number of calibration batches B")
    p.add_argument("--seed", type=int, default=0, help="shuffles samples before batching")
    p.add_argument("--out", required=True)
    p.add_argument("--config")

    p = sub.add_parser("convert", help="build a CSS-coded SNN from a network and calibration")
    p.add_argument("--network", required=True)
    p.add_argument("--calibration", required=True)
    _add_snn(p)
    p.add_argument("--out", required=True)
    p.add_argument("--config")

    p = sub.add_parser("run", help="simulate a converted model on a dataset")
    _add_model_source(p)
    p.add_argument("--gate", choices=("post", "online", "none"), default="post")
    p.add_argument("--coding", choices=("css", "rate"), default="css")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--config")

    p = sub.add_parser("validate", help="check the residual identity and the threshold sweep")
    p.add_argument("--trials", type=int, default=10_000, help="sequences per horizon for the identity check")
    p.add_argument("--horizons", type=_ints, default=[2, 4, 8, 16])
    p.add_argument("--mc-trials", type=int, default=100_000, help="Monte-Carlo trials for the sweep")
    p.add_argument("--T", dest="horizon", type=int, default=8)
    p.add_argument("--alphas", type=_floats, default=[0.3, 0.4, 0.5, 0.6, 0.7])
    p.add_argument("--tolerance", type=float, default=1e-9)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--config")

    p = sub.add_parser("analyze", help="emit plot-ready report rows")
    p.add_argument("which", choices=("mse", "residual", "energy", "ablation"))
    _add_model_source(p)
    p.add_argument("--css-T", type=_ints, default=[2, 3, 4, 5, 6])
    p.add_argument("--rate-T", type=_ints, default=None, help="defaults to 2**T per CSS horizon")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--curve-P", dest="curve_precharge", type=int, default=0, help="pre-charge for the scalar mse curve")
    p.add_argument("--alphas", type=_floats, default=[0.3, 0.4, 0.5, 0.6, 0.7])
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--precharges", type=_ints, default=[0, 1, 2, 3])
    p.add_argument("--e-ac", type=float, default=an.E_AC_PJ, help="pJ per accumulate")
    p.add_argument("--e-mac", type=float, default=an.E_MAC_PJ, help="pJ per multiply-accumulate")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help=".csv or .json")
    p.add_argument("--config")
    return parser


def _apply_config(args: argparse.Namespace) -> argparse.Namespace:
    if not getattr(args, "config", None):
        return args
    path = _existing(args.config)
    try:
        overrides = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path}: {exc}") from exc
    for key, value in overrides.items():
        key = {"T": "horizon", "P": "precharge"}.get(key, key.replace("-", "_"))
        if not hasattr(args, key):
            raise UsageError(f"config {path}: unknown option {key!r}")
        setattr(args, key, value)
    return args


def _resolved(args: argparse.Namespace) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k != "config"}


def _load_model(args):
    if args.model:
        model = load_model(_existing(args.model))
        stored = {"horizon": model.horizon, "precharge": model.precharge, "alpha": model.alpha}
        return model.with_params(**_snn_params(args, stored))
    if not (args.network and args.calibration):
        raise UsageError("give --model, or both --network and --calibration")
    spec = load_network(_existing(args.network))
    calib = load_calibration(_existing(args.calibration))
    return convert(spec, calib, **_snn_params(args))


def cmd_calibrate(args) -> int:
    if args.batches < 1:
        raise UsageError("--batches must be >= 1")
    spec = load_network(_existing(args.network))
    x, _ = load_dataset(_existing(args.dataset))
    order = np.random.default_rng(args.seed).permutation(len(x))
    batches = np.array_split(x[order], min(args.batches, len(x)))
    calib = calibrate(spec, batches, args.percentile)
    save_calibration(calib, args.out, {"seed": args.seed, "config": _resolved(args)})
    print(f"calibrated {len(calib.thresholds)} layer(s) -> {args.out}")
    return EXIT_OK


def cmd_convert(args) -> int:
    spec = load_network(_existing(args.network))
    calib = load_calibration(_existing(args.calibration))
    model = convert(spec, calib, **_snn_params(args))
    save_model(model, args.out, {"config": _resolved(args)})
    print(f"converted {len(model.thresholds)} relu layer(s) -> {args.out}")
    return EXIT_OK


def cmd_run(args) -> int:
    model = _load_model(args)
    x, y = load_dataset(_existing(args.dataset))
    if args.coding == "rate":
        model = model.with_params(precharge=0)
    logits, trace = snn_forward(model, x, gate=args.gate, coding=args.coding, keep_events=False)
    ann = model.spec.forward(x)
    pred, ann_pred = logits.argmax(axis=-1), ann.argmax(axis=-1)
    header = an.report_header(_resolved(args), args.seed)
    out = Path(args.out_dir)

    rows = []
    for i in range(len(x)):
        row = {"sample": i, "label": int(y[i]) if y is not None else "", "pred": int(pred[i]), "ann_pred": int(ann_pred[i])}
        row.update({f"logit_{k}": float(v) for k, v in enumerate(np.ravel(logits[i]))})
        rows.append(row)
    an.write_report(rows, out / "predictions.csv", header)

    trace_rows = []
    for rec in trace.spiking():
        for t in range(trace.horizon):
            s = rec.spikes[t]
            trace_rows.append(
                {
                    "layer": rec.index,
                    "step": t,
                    "pos_spikes": int(np.count_nonzero(s > 0)),
                    "neg_spikes": int(np.count_nonzero(s < 0)),
                    "v_th": rec.v_th,
                    "residual_mean": float(rec.residual.mean()),
                    "residual_rms": float(np.sqrt((rec.residual**2).mean())),
                    "deficit": rec.deficit,
                }
            )
    for rec in trace.layers:
        trace_rows.append({"layer": rec.index, "step": "all", "acs": rec.acs, "macs": rec.macs})
    an.write_report(trace_rows, out / "trace.csv", header)

    energy = an.energy_account(trace)
    summary = {
        "n_samples": len(x),
        "agreement": float(np.mean(pred == ann_pred)),
        "accuracy": float(np.mean(pred == y)) if y is not None else None,
        "ann_accuracy": float(np.mean(ann_pred == y)) if y is not None else None,
        "spikes": trace.spike_count,
        **energy.as_row(),
    }
    an.write_report([summary], out / "summary.json", header)
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def cmd_validate(args) -> int:
    if args.trials < 1 or args.mc_trials < 1:
        raise UsageError("trial counts must be >= 1")
    if not any(np.isclose(a, 0.5) for a in args.alphas):
        raise UsageError("--alphas must include 0.5")
    rows, ok = [], True
    for T in args.horizons:
        err = an.residual_identity_error(args.trials, T, seed=args.seed)
        passed = err < args.tolerance
        ok &= passed
        rows.append({"check": "residual_identity", "T": T, "max_rel_error": err, "pass": passed})
    stats = an.threshold_sweep(args.alphas, args.mc_trials, args.horizon, seed=args.seed)
    verdict = an.sweep_checks(stats)
    for s in stats:
        rows.append(
            {"check": "threshold_sweep", "alpha": s.alpha, "T": args.horizon, "mean": s.mean, "stderr": s.stderr,
             "mean_sq": s.mean_sq, "deficit_fraction": s.deficit_fraction}
        )
    rows.append({"check": "zero_mean_at_half", "z_score": verdict["z_score"], "pass": verdict["zero_mean"]})
    rows.append(
        {"check": "min_second_moment_at_half", "argmin_alpha": verdict["argmin_alpha"], "pass": verdict["minimal_second_moment"]}
    )
    ok &= verdict["zero_mean"] and verdict["minimal_second_moment"]
    for r in rows:
        if "pass" in r:
            print(f"{'PASS' if r['pass'] else 'FAIL'} {r['check']} " + " ".join(f"{k}={v}" for k, v in r.items() if k not in ("check", "pass")))
    if args.out:
        an.write_report(rows, args.out, an.report_header(_resolved(args), args.seed))
    return EXIT_OK if ok else EXIT_FAIL


def cmd_analyze(args) -> int:
    header = an.report_header(_resolved(args), args.seed)
    if args.which == "mse":
        rows = an.encoding_error_curve(
            args.css_T, args.rate_T, args.samples, precharge=args.curve_precharge, seed=args.seed
        )
        if args.model or args.network:
            model = _load_model(args)
            x, _ = load_dataset(_existing(args.dataset))
            css = [T for T in args.css_T if T > model.precharge]
            rows += an.layer_error_rows(model, x, css, args.rate_T)
    elif args.which == "residual":
        rows = []
        for s in an.threshold_sweep(args.alphas, args.trials, _snn_params(args)["horizon"], seed=args.seed):
            for k, c in enumerate(s.counts):
                rows.append(
                    {"alpha": s.alpha, "bin_lo": s.bin_edges[k], "bin_hi": s.bin_edges[k + 1], "count": c,
                     "mean": s.mean, "mean_sq": s.mean_sq}
                )
    elif args.which == "energy":
        model = _load_model(args)
        x, _ = load_dataset(_existing(args.dataset))
        rows = []
        for coding in ("css", "rate"):
            m = model if coding == "css" else model.with_params(horizon=2**model.horizon if args.rate_T is None else args.rate_T[0], precharge=0)
            logits, trace = snn_forward(m, x, coding=coding, keep_events=False)
            row = {"coding": coding, "T": m.horizon, "agreement": float(np.mean(logits.argmax(-1) == model.spec.forward(x).argmax(-1)))}
            row.update(an.energy_account(trace, args.e_ac, args.e_mac).as_row())
            rows.append(row)
    else:
        model = _load_model(args)
        x, y = load_dataset(_existing(args.dataset))
        rows = an.ablation_precharge(model, x, y, [P for P in args.precharges if P < model.horizon])
    an.write_report(rows, args.out, header)
    print(f"wrote {len(rows)} row(s) -> {args.out}")
    return EXIT_OK


COMMANDS = {
    "calibrate": cmd_calibrate,
    "convert": cmd_convert,
    "run": cmd_run,
    "validate": cmd_validate,
    "analyze": cmd_analyze,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = _apply_config(args)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"css-snn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CalibrationError, NetworkError, ValueError) as exc:
        if isinstance(exc, LoadError):
            print(f"css-snn: I/O error: {exc}", file=sys.stderr)
            return EXIT_IO
        print(f"css-snn: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"css-snn: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
