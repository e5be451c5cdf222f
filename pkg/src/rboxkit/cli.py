"""Command-line frontend: file-based inputs, CSV/JSON outputs.

Exit codes: 0 success, 1 usage error, 2 input-validation error, 3 internal
check failure (a verification subcommand exceeded its tolerance). Value
precedence for every option is flags > --config file > built-in defaults;
the config file is a flat JSON object keyed by option name (underscores).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import evalkit
from .anglecode import arcsl_encode, csl_encode
from .arsmatch import build_cost_matrix, hungarian
from .dnoise import NoiseConfig
from .errors import ValidationError
from .rbox import RBox, aspect_ratio, canonical_rbox
from .rdageom import gradient_check_suite
from .skewiou import iou_curve

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_CHECK_FAILED = 3

JOBS_ENV_VAR = "RBOXKIT_JOBS"

DEFAULTS = {
    "interp": "voc07",
    "step": 1.0,
    "radius": 6.0,
    "label_theta": 90.0,
    "noise_scale": 0.1,
    "seed": 0,
    "deviations": "0,5,10",
    "k_list": "1,1.5,3,8",
    "instances": 100,
    "fd_step": 1e-4,
    "tol": 1e-4,
    "w_cls": 2.0,
    "w_box": 5.0,
    "w_theta": 1.0,
    "iou_cost_weight": 0.0,
    "synthetic": 0,
    "mode": "fixed",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _default_jobs() -> int | None:
    raw = os.environ.get(JOBS_ENV_VAR)
    if raw is None:
        return None
    try:
        return max(1, int(raw))
    except ValueError:
        return None


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            config = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read config file: {exc}")
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config file is not valid JSON: {exc}")
    if not isinstance(config, dict):
        raise ValidationError("config file must hold a JSON object")
    return config


def _resolve(args: argparse.Namespace, *names: str) -> dict:
    """Merge parsed flags with config-file values and built-in defaults."""
    config = _load_config(getattr(args, "config", None))
    merged = {}
    for name in names:
        value = getattr(args, name, None)
        if value is None:
            value = config.get(name, DEFAULTS.get(name))
        merged[name] = value
    return merged


def _parse_float_list(raw, flag: str) -> list[float]:
    try:
        values = [float(tok) for tok in str(raw).replace(" ", "").split(",") if tok]
    except ValueError:
        raise ValidationError(f"{flag} must be a comma-separated number list, got {raw!r}")
    if not values:
        raise ValidationError(f"{flag} must name at least one value")
    return values


def _write_json(path, payload) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True)
    if path is None:
        print(text)
    else:
        Path(path).write_text(text + "\n")


def _print_warnings(result) -> None:
    for warning in result.warnings:
        print(f"warning: {warning.path}:{warning.line_number}: {warning.message}",
              file=sys.stderr)


def cmd_eval(args) -> int:
    opts = _resolve(args, "interp")
    jobs = args.jobs if args.jobs is not None else _default_jobs()
    gt_result = evalkit.parse_dota_gt(args.gt)
    _print_warnings(gt_result)
    pred_result = evalkit.parse_dota_preds(args.preds)
    _print_warnings(pred_result)
    if args.max_dets is not None:
        pred_result.records = evalkit.cap_detections(pred_result.records,
                                                     args.max_dets)

    report = evalkit.full_report(pred_result.records, gt_result.records,
                                 interp=opts["interp"], jobs=jobs)
    report["warnings"] = [
        {"path": w.path, "line": w.line_number, "message": w.message}
        for w in gt_result.warnings + pred_result.warnings
    ]
    _write_json(args.out, report)

    if args.pr_curves is not None:
        out_dir = Path(args.pr_curves)
        out_dir.mkdir(parents=True, exist_ok=True)
        for threshold, tag in ((0.5, "ap50"), (0.75, "ap75")):
            ap_report = evalkit.average_precision(
                pred_result.records, gt_result.records, threshold,
                mode="rotated", interp=opts["interp"], jobs=jobs)
            for name, curve in ap_report.per_category.items():
                lines = ["recall,precision"]
                lines += [f"{r:.10g},{p:.10g}" for r, p in curve.points]
                (out_dir / f"pr_{name}_{tag}.csv").write_text("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_curve(args) -> int:
    opts = _resolve(args, "k_list", "step", "radius", "label_theta")
    k_values = _parse_float_list(opts["k_list"], "--k-list")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    for k in k_values:
        curve = iou_curve(k, float(opts["step"]))
        (out_dir / f"curve_k{k:g}.csv").write_text(curve.to_csv())

    label_kinds = [tok for tok in (args.labels or "").split(",") if tok]
    theta = float(opts["label_theta"])
    for kind in label_kinds:
        if kind == "csl":
            rows = [(k, csl_encode(theta, float(opts["radius"]))) for k in k_values]
        elif kind == "arcsl":
            rows = [(k, arcsl_encode(theta, k)) for k in k_values]
        else:
            raise ValidationError(f"--labels entries must be csl or arcsl, got {kind!r}")
        lines = ["k," + ",".join(f"bin{i}" for i in range(180))]
        for k, vec in rows:
            lines.append(f"{k:g}," + ",".join(f"{v:.10g}" for v in vec))
        (out_dir / f"labels_{kind}.csv").write_text("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_encode(args) -> int:
    opts = _resolve(args, "radius")
    if args.theta is None:
        raise ValidationError("--theta is required")
    if args.method == "csl":
        vector = csl_encode(args.theta, float(opts["radius"]))
    elif args.method == "arcsl":
        if args.k is None:
            raise ValidationError("--k is required for the arcsl method")
        vector = arcsl_encode(args.theta, args.k)
    else:
        raise ValidationError(f"--method must be csl or arcsl, got {args.method!r}")
    line = ",".join(f"{v:.10g}" for v in vector)
    if args.out is None:
        print(line)
    else:
        Path(args.out).write_text(line + "\n")
    return EXIT_OK


def cmd_perturb(args) -> int:
    opts = _resolve(args, "interp", "deviations", "noise_scale", "seed", "mode",
                    "synthetic")
    if args.gt is not None:
        gts = evalkit.parse_dota_gt(args.gt)
        _print_warnings(gts)
        records = gts.records
    elif int(opts["synthetic"]) > 0:
        records = evalkit.synthetic_ground_truth(int(opts["synthetic"]),
                                                 seed=int(opts["seed"]))
    else:
        raise ValidationError("provide --gt DIR or --synthetic N")
    if not records:
        raise ValidationError("no ground-truth objects to perturb")

    if opts["mode"] == "fixed":
        deviations = _parse_float_list(opts["deviations"], "--deviations")
        rows = evalkit.perturbation_study(records, deviations, interp=opts["interp"])
    elif opts["mode"] == "random":
        cfg = NoiseConfig(angle_scale=float(opts["noise_scale"]), seed=int(opts["seed"]))
        rows = evalkit.angle_noise_study(records, cfg, interp=opts["interp"])
    else:
        raise ValidationError(f"--mode must be fixed or random, got {opts['mode']!r}")
    _write_json(args.out, {"rows": rows, "interp": opts["interp"]})
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    opts = _resolve(args, "instances", "seed", "fd_step", "tol")
    report = gradient_check_suite(instances=int(opts["instances"]),
                                  seed=int(opts["seed"]),
                                  step=float(opts["fd_step"]))
    tol = float(opts["tol"])
    passed = report["max_relative_error"] <= tol
    report["tolerance"] = tol
    report["passed"] = passed
    _write_json(args.out, report)
    print(f"gradient check: max relative error {report['max_relative_error']:.3e} "
          f"(tolerance {tol:.1e}) -> {'PASS' if passed else 'FAIL'}",
          file=sys.stderr)
    return EXIT_OK if passed else EXIT_CHECK_FAILED


def _demo_box(raw) -> RBox:
    if not (isinstance(raw, (list, tuple)) and len(raw) == 5):
        raise ValidationError(f"box must be [cx, cy, w, h, theta], got {raw!r}")
    return canonical_rbox(*(float(v) for v in raw))


def cmd_matchdemo(args) -> int:
    opts = _resolve(args, "w_cls", "w_box", "w_theta", "iou_cost_weight")
    try:
        with open(args.input) as fh:
            payload = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read input file: {exc}")
    except json.JSONDecodeError as exc:
        raise ValidationError(f"input file is not valid JSON: {exc}")

    preds = []
    for entry in payload.get("predictions", []):
        box = _demo_box(entry.get("box"))
        scores = entry.get("scores")
        if scores is None:
            raise ValidationError("each prediction needs a 'scores' list")
        if "label" in entry:
            label = np.asarray(entry["label"], dtype=float)
        elif "theta" in entry:
            # demo convenience: self-encode the predicted angle at the box's
            # own aspect ratio
            label = arcsl_encode(float(entry["theta"]) % 180.0, aspect_ratio(box))
        else:
            raise ValidationError("each prediction needs 'label' or 'theta'")
        preds.append((np.asarray(scores, dtype=float), box, label))

    gts = []
    for entry in payload.get("ground_truths", []):
        if "class_id" not in entry:
            raise ValidationError("each ground truth needs 'class_id'")
        gts.append((int(entry["class_id"]), _demo_box(entry.get("box"))))

    weights = (float(opts["w_cls"]), float(opts["w_box"]), float(opts["w_theta"]))
    matrix = build_cost_matrix(preds, gts, weights,
                               skewiou_cost_weight=float(opts["iou_cost_weight"]))
    assignment = hungarian(matrix)
    _write_json(args.out, {
        "cost_matrix": [[float(v) for v in row] for row in matrix],
        "pairs": [list(p) for p in assignment.pairs],
        "total_cost": assignment.total_cost,
        "weights": {"w_cls": weights[0], "w_box": weights[1], "w_theta": weights[2]},
    })
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rboxkit",
                     description="Rotated-box geometry, angle labels, matching, "
                                 "and oriented-detection evaluation")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config file; flags still win")
        p.add_argument("--out", help="output file (JSON); stdout when omitted")

    p = sub.add_parser("eval", help="score DOTA-format predictions against annotations")
    p.add_argument("--gt", required=True, help="directory of per-image annotation files")
    p.add_argument("--preds", required=True, help="directory of Task1_<category>.txt files")
    p.add_argument("--interp", choices=["voc07", "all_points"],
                   help="AP interpolation rule (default voc07)")
    p.add_argument("--pr-curves", help="directory to receive per-category PR CSVs")
    p.add_argument("--max-dets", dest="max_dets", type=int,
                   help="optional cap on detections per image, >= 1 (default none)")
    p.add_argument("--jobs", type=int,
                   help=f"parallel category workers (default ${JOBS_ENV_VAR} or 1)")
    add_common(p)
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("curve", help="emit SkewIoU-vs-deviation curves and label heatmaps")
    p.add_argument("--k-list", dest="k_list", help="comma-separated aspect ratios")
    p.add_argument("--step", type=float, help="deviation step in degrees, (0, 5]")
    p.add_argument("--labels", help="comma-separated label heatmaps to emit: csl,arcsl")
    p.add_argument("--radius", type=float, help="window radius for the csl heatmap")
    p.add_argument("--label-theta", dest="label_theta", type=float,
                   help="angle encoded in the heatmaps (default 90)")
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.add_argument("--config")
    p.set_defaults(handler=cmd_curve)

    p = sub.add_parser("encode", help="emit one angle label vector as CSV")
    p.add_argument("--method", choices=["csl", "arcsl"], required=True)
    p.add_argument("--theta", type=float, help="angle in degrees, [0, 180)")
    p.add_argument("--radius", type=float, help="csl window radius (default 6)")
    p.add_argument("--k", type=float, help="aspect ratio for arcsl")
    add_common(p)
    p.set_defaults(handler=cmd_encode)

    p = sub.add_parser("perturb", help="angle-perturbation sensitivity study")
    p.add_argument("--gt", help="directory of annotation files")
    p.add_argument("--synthetic", type=int,
                   help="generate N synthetic objects instead of reading --gt")
    p.add_argument("--deviations", help="comma-separated fixed shifts in degrees")
    p.add_argument("--mode", choices=["fixed", "random"],
                   help="fixed shifts or random bounded noise (default fixed)")
    p.add_argument("--noise-scale", dest="noise_scale", type=float,
                   help="random-mode noise scale in (0, 1] (default 0.1)")
    p.add_argument("--seed", type=int, help="RNG seed (default 0)")
    p.add_argument("--interp", choices=["voc07", "all_points"])
    add_common(p)
    p.set_defaults(handler=cmd_perturb)

    p = sub.add_parser("grad-check", help="verify analytic sampling gradients")
    p.add_argument("--instances", type=int, help="random instances (default 100)")
    p.add_argument("--seed", type=int, help="RNG seed (default 0)")
    p.add_argument("--fd-step", dest="fd_step", type=float,
                   help="central-difference step (default 1e-4)")
    p.add_argument("--tol", type=float, help="max relative error allowed (default 1e-4)")
    add_common(p)
    p.set_defaults(handler=cmd_gradcheck)

    p = sub.add_parser("match-demo", help="build a cost matrix and solve the assignment")
    p.add_argument("--input", required=True, help="JSON with predictions and ground_truths")
    p.add_argument("--w-cls", dest="w_cls", type=float, help="classification weight (default 2)")
    p.add_argument("--w-box", dest="w_box", type=float, help="box L1 weight (default 5)")
    p.add_argument("--w-theta", dest="w_theta", type=float, help="angle weight (default 1)")
    p.add_argument("--iou-cost-weight", dest="iou_cost_weight", type=float,
                   help="optional (1 - SkewIoU) cost weight (default 0)")
    add_common(p)
    p.set_defaults(handler=cmd_matchdemo)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.handler(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
