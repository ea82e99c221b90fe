"""Command-line front door: calibrate | detect | intervals | eval | simulate | report.

Every run writes its fully resolved configuration next to its outputs, so a
run is reproducible from the emitted files alone.  Exit codes: 0 success,
1 schema or label errors, 2 calibration found nothing feasible.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import intervals as intervals_mod
from . import metrics as metrics_mod
from . import riskcal, simulate
from .errors import EmptyAcceptedSet, NoFeasibleLambda, ToolkitError
from .concentration import TailBound
from .riskcal import RiskKind, RiskSpec, resolve_workers
from .scoredata import Dataset, DatasetKind, load_dataset, summarize_distribution
from .wordscore import Mode, PredictionSet, error_scores, predict

_BOUNDS = {
    "hb": TailBound.HOEFFDING_BENTKUS,
    "hoeffding": TailBound.HOEFFDING,
    "bentkus": TailBound.BENTKUS,
}

EXIT_OK = 0
EXIT_DATA_ERROR = 1
EXIT_NO_FEASIBLE = 2


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _write_resolved_config(out: Path, command: str, params: dict) -> None:
    config_path = out.with_name(out.stem + ".config.json")
    _write_json(config_path, {"command": command, **params})


def _print_curve(result: riskcal.CalibrationResult, max_rows: int = 21) -> None:
    grid = result.grid
    stride = max(1, len(grid) // max_rows)
    if result.r_plus is not None:
        print(f"{'lambda':>10}  {'risk':>10}  {'ucb':>10}")
        rows = result.ucb_curve
        for i in range(0, len(rows), stride):
            lam, r, u = rows[i]
            mark = "  <- lambda_hat" if result.lambda_hat == lam else ""
            print(f"{lam:>10.4f}  {r:>10.6f}  {u:>10.6f}{mark}")
    if result.p_values is not None:
        print(f"{'lambda':>10}  {'risk':>10}  {'p_value':>12}")
        for i in range(0, len(grid), stride):
            lam, p = float(grid[i]), float(result.p_values[i])
            mark = "  <- lambda_hat" if result.lambda_hat == lam else ""
            print(f"{lam:>10.4f}  {float(result.r_hat[i]):>10.6f}  {p:>12.4g}{mark}")


def cmd_calibrate(args) -> int:
    risk = RiskKind(args.risk)
    bound = _BOUNDS[args.bound]
    if risk is RiskKind.UPR:
        grid = intervals_mod.default_scale_grid(args.grid_size or 201)
        dataset = load_dataset(args.data, DatasetKind.INTERVAL)
    else:
        grid = riskcal.default_threshold_grid(args.grid_size or 1001)
        dataset = load_dataset(args.data, DatasetKind.DETECTION)
    spec = RiskSpec(
        risk_kind=risk,
        alpha=args.alpha,
        delta=args.delta,
        lambda_grid=grid,
        mode=Mode(args.mode),
        bound=bound,
    )
    workers = resolve_workers(args.workers)
    out = Path(args.out)
    _write_resolved_config(
        out,
        "calibrate",
        {
            "data": str(args.data),
            "risk": risk.value,
            "alpha": args.alpha,
            "delta": args.delta,
            "mode": args.mode,
            "method": args.method,
            "bound": args.bound,
            "grid_size": len(grid),
            "workers": workers,
            "out": str(out),
        },
    )
    try:
        if args.method == "monotone":
            result = riskcal.calibrate_monotone(dataset, spec, workers=workers)
        elif risk is RiskKind.UPR:
            result = intervals_mod.calibrate_intervals(dataset, spec)
        else:
            result = riskcal.ltt_calibrate(dataset, spec)
    except (NoFeasibleLambda, EmptyAcceptedSet) as exc:
        result = getattr(exc, "result", None)
        print(f"calibration failed: {exc}", file=sys.stderr)
        if result is not None:
            _write_json(out, result.to_dict())
            _print_curve(result)
        return EXIT_NO_FEASIBLE
    _write_json(out, result.to_dict())
    _print_curve(result)
    print(f"lambda_hat = {result.lambda_hat:.6f}")
    return EXIT_OK


def _load_predictions(path: Path, fallback_mode: Mode) -> list[PredictionSet]:
    preds = []
    with path.open("r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            preds.append(
                PredictionSet(
                    instance_id=record["id"],
                    selected=frozenset(record["selected"]),
                    mode=Mode(record.get("mode", fallback_mode)),
                    lambda_used=float(record.get("lambda", 0.0)),
                )
            )
    return preds


def _detection_report(dataset: Dataset, preds: list[PredictionSet]) -> metrics_mod.MetricReport:
    labels = {}
    for instance in dataset:
        if instance.foil_labels is None:
            raise ToolkitError(
                f"instance {instance.id!r} carries no foil labels; cannot evaluate"
            )
        labels[instance.id] = instance.foil_labels
    fvs = [error_scores(instance) for instance in dataset]
    report = metrics_mod.MetricReport(n_instances=dataset.n)
    wp, wr, wf = metrics_mod.word_prf(preds, labels)
    report.values.update(word_precision=wp, word_recall=wr, word_f1=wf)
    ip, ir, iff = metrics_mod.instance_prf(preds, labels)
    report.values.update(instance_precision=ip, instance_recall=ir, instance_f1=iff)
    caption_scores = np.array(
        [float(fv.scores.max()) if len(fv.scores) else 0.0 for fv in fvs]
    )
    caption_labels = np.array([1 if labels[fv.instance_id] else 0 for fv in fvs])
    try:
        report.values["average_precision"] = metrics_mod.average_precision(
            caption_scores, caption_labels
        )
    except ToolkitError:
        pass
    try:
        report.values["location_accuracy"] = metrics_mod.location_accuracy(
            preds, fvs, labels, metrics_mod.LAVariant.TOP1
        )
        report.values["location_accuracy_set"] = metrics_mod.location_accuracy(
            preds, fvs, labels, metrics_mod.LAVariant.SET
        )
    except ToolkitError:
        pass
    return report


def cmd_detect(args) -> int:
    dataset = load_dataset(args.data, DatasetKind.DETECTION)
    mode = Mode(args.mode) if args.mode else None
    lam = args.lam
    if lam is None:
        if not args.calibration:
            print("detect needs --lam or --calibration", file=sys.stderr)
            return EXIT_DATA_ERROR
        calib = json.loads(Path(args.calibration).read_text(encoding="utf-8"))
        lam = calib.get("lambda_hat")
        if lam is None:
            print("calibration file carries no lambda_hat", file=sys.stderr)
            return EXIT_NO_FEASIBLE
        if mode is None and "mode" in calib.get("diagnostics", {}):
            mode = Mode(calib["diagnostics"]["mode"])
    if mode is None:
        mode = Mode.MULTILABEL
    out = Path(args.out)
    _write_resolved_config(
        out,
        "detect",
        {"data": str(args.data), "lambda": lam, "mode": mode.value, "out": str(out)},
    )
    preds = []
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8") as handle:
        for instance in dataset:
            pred = predict(error_scores(instance), lam, mode)
            preds.append(pred)
            handle.write(
                json.dumps(
                    {
                        "id": pred.instance_id,
                        "selected": sorted(pred.selected),
                        "lambda": pred.lambda_used,
                        "mode": pred.mode.value,
                    },
                    sort_keys=True,
                )
                + "\n"
            )
    if all(instance.foil_labels is not None for instance in dataset):
        report = _detection_report(dataset, preds)
        print(report.format_table())
    print(f"wrote {len(preds)} prediction sets to {out}")
    return EXIT_OK


def cmd_intervals(args) -> int:
    dataset = load_dataset(args.data, DatasetKind.INTERVAL)
    if args.lambda_scale == "calibrated":
        if not args.calibration:
            print("--lambda-scale calibrated needs --calibration", file=sys.stderr)
            return EXIT_DATA_ERROR
        calib = json.loads(Path(args.calibration).read_text(encoding="utf-8"))
        if calib.get("lambda_hat") is None:
            print("calibration file carries no lambda_hat", file=sys.stderr)
            return EXIT_NO_FEASIBLE
        lambda_scale = float(calib["lambda_hat"])
    else:
        lambda_scale = float(args.lambda_scale)
    out = Path(args.out)
    _write_resolved_config(
        out,
        "intervals",
        {
            "data": str(args.data),
            "lambda_scale": lambda_scale,
            "z": args.z,
            "out": str(out),
        },
    )
    results = intervals_mod.fit_intervals(dataset, lambda_scale, z=args.z)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8") as handle:
        for r in results:
            handle.write(
                json.dumps(
                    {
                        "id": r.instance_id,
                        "mean_hat": r.mean_hat,
                        "std_hat": r.std_hat,
                        "lower": r.lower,
                        "upper": r.upper,
                    },
                    sort_keys=True,
                )
                + "\n"
            )
    if all(instance.human_score is not None for instance in dataset):
        human = np.array([instance.human_score for instance in dataset])
        mean_hat = np.array([r.mean_hat for r in results])
        std_hat = np.array([r.std_hat for r in results])
        try:
            score = intervals_mod.ups(np.abs(mean_hat - human), std_hat)
            print(f"UPS = {score:.4f} (x100: {100 * score:.1f})")
        except ToolkitError as exc:
            print(f"UPS undefined: {exc}")
        try:
            tau = metrics_mod.kendall_tau_c(mean_hat, human)
            print(f"kendall_tau_c = {tau:.4f}")
        except ToolkitError as exc:
            print(f"kendall_tau_c undefined: {exc}")
    print(f"wrote {len(results)} intervals to {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    dataset = load_dataset(args.data, DatasetKind.DETECTION)
    preds = _load_predictions(Path(args.preds), Mode.MULTILABEL)
    report = _detection_report(dataset, preds)
    print(report.format_table())
    if args.out:
        _write_json(Path(args.out), report.as_dict())
    return EXIT_OK


def _parse_foils(value):
    if isinstance(value, (list, tuple)):
        lo, hi = value
        return (int(lo), int(hi))
    text = str(value)
    if ":" in text:
        lo, hi = text.split(":", 1)
        return (int(lo), int(hi))
    return int(text)


_SIMULATE_DEFAULTS_SPEC = [
    ("--n-cal", dict(type=int, default=500)),
    ("--n-test", dict(type=int, default=None)),
    ("--trials", dict(type=int, default=100)),
    ("--words", dict(type=int, default=8)),
    ("--foils", dict(default="1", help="count or lo:hi range")),
    ("--separation", dict(type=float, default=0.75)),
    ("--noise", dict(type=float, default=0.5)),
    ("--seed", dict(type=int, default=0)),
    ("--mode", dict(choices=["multiclass", "multilabel"], default="multilabel")),
    ("--mask-words", dict(type=int, default=1)),
    ("--risk", dict(choices=["fdr", "fpr"], default="fdr")),
    ("--alpha", dict(type=float, default=0.2)),
    ("--delta", dict(type=float, default=0.1)),
    ("--grid-size", dict(type=int, default=101)),
    ("--bound", dict(choices=sorted(_BOUNDS), default="hb")),
]
_SIMULATE_DEFAULTS = {
    flag.lstrip("-").replace("-", "_"): kwargs.get("default")
    for flag, kwargs in _SIMULATE_DEFAULTS_SPEC
}


def _apply_config_file(args) -> None:
    """Fill args from a JSON config file; explicit flags win over the file."""
    file_values = json.loads(Path(args.config).read_text(encoding="utf-8"))
    unknown = set(file_values) - set(_SIMULATE_DEFAULTS)
    if unknown:
        raise ToolkitError(f"unknown keys in config file: {sorted(unknown)}")
    for key, value in file_values.items():
        if getattr(args, key) == _SIMULATE_DEFAULTS[key]:
            setattr(args, key, value)


def cmd_simulate(args) -> int:
    if args.config:
        _apply_config_file(args)
    config = simulate.SynthConfig(
        n_cal=args.n_cal,
        n_trials=args.trials,
        n_test=args.n_test,
        words_per_caption=args.words,
        foils_per_caption=_parse_foils(args.foils),
        separation=args.separation,
        noise=args.noise,
        seed=args.seed,
        mode=Mode(args.mode),
        mask_words=args.mask_words,
    )
    spec = RiskSpec(
        risk_kind=RiskKind(args.risk),
        alpha=args.alpha,
        delta=args.delta,
        lambda_grid=riskcal.default_threshold_grid(args.grid_size),
        mode=Mode(args.mode),
        bound=_BOUNDS[args.bound],
    )
    workers = resolve_workers(args.workers)
    out = Path(args.out)
    _write_resolved_config(
        out,
        "simulate",
        {
            "n_cal": config.n_cal,
            "n_test": config.n_test,
            "trials": config.n_trials,
            "words": config.words_per_caption,
            "foils": args.foils,
            "separation": config.separation,
            "noise": config.noise,
            "seed": config.seed,
            "mode": config.mode.value,
            "mask_words": config.mask_words,
            "risk": args.risk,
            "alpha": args.alpha,
            "delta": args.delta,
            "grid_size": args.grid_size,
            "bound": args.bound,
            "workers": workers,
            "out": str(out),
        },
    )
    records = simulate.run_trials(config, spec, workers=workers)
    report = simulate.aggregate_records(records, spec)
    _write_json(out, report.to_dict())
    if args.per_trial_csv:
        csv_path = Path(args.per_trial_csv)
        csv_path.parent.mkdir(parents=True, exist_ok=True)
        with csv_path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["trial", "failed", "lambda_hat", "cal_risk", "test_risk", "violation"])
            for r in records:
                writer.writerow(
                    [
                        r.trial,
                        int(r.failed),
                        "" if r.lambda_hat is None else repr(r.lambda_hat),
                        "" if r.cal_risk is None else repr(r.cal_risk),
                        "" if r.test_risk is None else repr(r.test_risk),
                        int(r.violation),
                    ]
                )
    print(
        f"trials={report.trials} violations={report.violations} "
        f"rate={report.violation_rate:.4f} (target delta={report.target_delta}) "
        f"mean_test_risk={report.mean_test_risk:.4f} (alpha={report.target_alpha})"
    )
    return EXIT_OK


def cmd_report(args) -> int:
    dataset = load_dataset(args.data, args.kind)
    out = Path(args.out)
    _write_resolved_config(
        out, "report", {"data": str(args.data), "kind": args.kind, "out": str(out)}
    )
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["id", "count", "mu", "sigma", "degenerate"])
        for instance in dataset:
            flat = instance.score_matrix().reshape(-1)
            if flat.size < 2:
                mu = repr(float(flat.mean())) if flat.size else ""
                writer.writerow([instance.id, flat.size, mu, "", 1, *[repr(float(x)) for x in flat]])
                continue
            mu, sigma, flat = summarize_distribution(instance)
            writer.writerow(
                [instance.id, flat.size, repr(mu), repr(sigma), 0, *[repr(float(x)) for x in flat]]
            )
    print(f"wrote score distributions for {dataset.n} instances to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="riskctl",
        description="Risk-controlled calibration over CLIPScore distributions",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="select a risk-controlled threshold or scale")
    p.add_argument("--data", required=True)
    p.add_argument("--risk", choices=["fdr", "fpr", "upr"], default="fdr")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--mode", choices=["multiclass", "multilabel"], default="multilabel")
    p.add_argument("--method", choices=["monotone", "ltt"], default="monotone")
    p.add_argument("--grid-size", type=int, default=None)
    p.add_argument("--bound", choices=sorted(_BOUNDS), default="hb")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("detect", help="emit prediction sets at a threshold")
    p.add_argument("--data", required=True)
    p.add_argument("--lam", type=float, default=None)
    p.add_argument("--calibration", default=None)
    p.add_argument("--mode", choices=["multiclass", "multilabel"], default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("intervals", help="emit calibrated score intervals")
    p.add_argument("--data", required=True)
    p.add_argument("--lambda-scale", default="1.0")
    p.add_argument("--calibration", default=None)
    p.add_argument("--z", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_intervals)

    p = sub.add_parser("eval", help="score prediction sets against labels")
    p.add_argument("--data", required=True)
    p.add_argument("--preds", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("simulate", help="validate the guarantee on synthetic data")
    p.add_argument("--config", default=None,
                   help="JSON file of simulate parameters; explicit flags win")
    for flag, kwargs in _SIMULATE_DEFAULTS_SPEC:
        p.add_argument(flag, **kwargs)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--per-trial-csv", default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", help="export raw score distributions as CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--kind", choices=["detection", "interval"], default="detection")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (NoFeasibleLambda, EmptyAcceptedSet) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_FEASIBLE
    except (ToolkitError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA_ERROR


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
