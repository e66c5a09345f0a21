"""Command line entry points: generate / train / eval / sweep.

Exit codes: 0 ok, 2 usage or config problem, 3 data problem, 4 numeric
failure. Headers and file names written here are documented in docs/cli.md
and treated as stable interfaces by the tests.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from .config import (ABLATABLE, MODALITY_TOKENS, PHASE_TOKENS, TrainConfig,
                     build_config, parse_config_file)
from .errors import ConfigError, DataError, NumericError
from .metrics import (EvalReport, PerSampleEval, aggregate, write_eval_csv,
                      write_summary_csv)
from .phantom import CLASS_NAMES, CorpusSpec, generate_corpus
from .radiomics import feature_names
from .storage import load_corpus, write_sample

SWEEP_METRIC_COLS = ("dsc", "p_acc", "iou", "tpr", "tnr", "acc")


def _parse_mix(text: str) -> tuple[float, float, float]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise ConfigError(f"--mix wants three comma-separated fractions, got {text!r}")
    try:
        mix = tuple(float(p) for p in parts)
    except ValueError:
        raise ConfigError(f"--mix fractions must be numbers, got {text!r}") from None
    if abs(sum(mix) - 1.0) > 1e-9:
        raise ConfigError(f"--mix fractions must sum to 1, got {sum(mix)}")
    return mix


def cmd_generate(args) -> int:
    spec = CorpusSpec(count=args.count, height=args.height, width=args.width,
                      mix=_parse_mix(args.mix), seed=args.seed)
    if spec.count < 1:
        raise ConfigError(f"--count must be positive, got {spec.count}")
    samples = generate_corpus(spec)
    out = Path(args.out)
    for s in samples:
        write_sample(out, s)
    counts = [0, 0, 0]
    for s in samples:
        counts[s.cls] += 1
    label = " ".join(f"{CLASS_NAMES[c]}={counts[c]}" for c in range(3))
    print(f"generated {len(samples)} samples at {out}: {label}")
    return 0


def _train_config_from_args(args) -> TrainConfig:
    file_values = parse_config_file(args.config) if args.config else None
    flags = {
        "data_dir": args.data,
        "out_dir": args.out,
        "iterations": args.iterations,
        "batch_size": args.batch_size,
        "lr": args.lr,
        "lambda1": args.lambda1,
        "lambda2": args.lambda2,
        "lambda3": args.lambda3,
        "seed": args.seed,
        "ablate": args.ablate,
        "modalities": args.modalities,
        "phases": args.phases,
        "swap_disc_labels": True if args.swap_disc_labels else None,
        "cswp_mode": args.cswp_mode,
        "optimizer": args.optimizer,
        "checkpoint_every": args.checkpoint_every,
        "resume": args.resume,
    }
    return build_config(file_values, flags)


def cmd_train(args) -> int:
    from .training import train

    cfg = _train_config_from_args(args)
    if not cfg.resume and not cfg.data_dir:
        raise ConfigError("train needs --data (or a config file data_dir)")
    if not cfg.out_dir:
        raise ConfigError("train needs --out (or a config file out_dir)")
    result = train(cfg)
    last = result.records[-1] if result.records else None
    if last is not None:
        print(f"step {last.step}: l_seg={last.l_seg:.4f} l_cls={last.l_cls:.4f} "
              f"l_reg={last.l_reg:.4f} l_disc={last.l_disc:.4f}")
    print(f"trained {result.steps} steps, checkpoint {result.checkpoint}, log {result.log_path}")
    return 0


def _oracle_report(samples) -> EvalReport:
    rows = []
    for s in samples:
        iou = None if s.box is None else 100.0
        rows.append(PerSampleEval(sample_id=s.sample_id, dsc=100.0, p_acc=100.0,
                                  iou=iou, gt_cls=s.cls, pred_cls=s.cls))
    return aggregate(rows)


def _dump_radiomics(samples, phases, out_path: Path):
    from .canvas import integrate
    from .radiomics import extract_mpr

    names = feature_names(tuple(phases))
    with open(out_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["sample_id"] + names)
        for s in samples:
            if s.cls == 0:
                continue
            grids = {ph: g for ph, g in
                     (("a", s.ce_a), ("pv", s.ce_pv), ("delay", s.ce_d)) if ph in phases}
            vec = extract_mpr(integrate(s.mask, s.box), None, grids)
            w.writerow([s.sample_id] + [f"{v:.6f}" for v in vec.values])


def cmd_eval(args) -> int:
    samples = load_corpus(args.data)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    phases = PHASE_TOKENS
    if args.oracle:
        report = _oracle_report(samples)
    else:
        if not args.checkpoint:
            raise ConfigError("eval needs --checkpoint unless --oracle is set")
        from .training import evaluate, infer, load_model_for_eval

        gen, cfg = load_model_for_eval(args.checkpoint)
        phases = cfg.phases
        report = evaluate(samples, gen, cfg)
        if args.figures:
            from .figures import save_heatmap, save_overlays

            fig_dir = out / "figures"
            for s in samples[: args.figures]:
                seg, det = infer(s, gen, cfg)
                save_overlays(s, seg, det, fig_dir, modalities=cfg.modalities)
                save_heatmap(s, seg, fig_dir)
    write_eval_csv(out / "eval.csv", report)
    write_summary_csv(out / "summary.csv", report)
    if args.dump_radiomics:
        _dump_radiomics(samples, phases, out / "radiomics.csv")
    print("  ".join(f"{k}={getattr(report, k):.2f}" for k in SWEEP_METRIC_COLS))
    print(f"wrote {out / 'eval.csv'} and {out / 'summary.csv'}")
    return 0


def _modality_combos():
    t = MODALITY_TOKENS
    return [(t[0],), (t[1],), (t[2],), (t[0], t[1]), (t[0], t[2]), (t[1], t[2]), t]


def _phase_combos():
    p = PHASE_TOKENS
    return [(p[0],), (p[1],), (p[2],), (p[0], p[1]), (p[0], p[2]), (p[1], p[2]), p]


def _sweep_jobs(axis: str, base: TrainConfig) -> list[tuple[dict, TrainConfig]]:
    jobs = []
    if axis == "modalities":
        for combo in _modality_combos():
            cfg = build_config(flag_values={**base.echo(), "modalities": combo})
            jobs.append(({m: int(m in combo) for m in MODALITY_TOKENS}, cfg))
    elif axis == "phases":
        for combo in _phase_combos():
            cfg = build_config(flag_values={**base.echo(), "phases": combo})
            jobs.append(({p: int(p in combo) for p in PHASE_TOKENS}, cfg))
    elif axis == "ablations":
        cfg = build_config(flag_values={**base.echo(), "ablate": ()})
        jobs.append(({"variant": "full"}, cfg))
        for flag in ABLATABLE:
            cfg = build_config(flag_values={**base.echo(), "ablate": (flag,)})
            jobs.append(({"variant": f"no_{flag}"}, cfg))
    else:
        raise ConfigError(f"unknown sweep axis {axis!r}")
    seen = set()
    for label, _ in jobs:
        key = tuple(sorted(label.items()))
        if key in seen:
            raise ConfigError(f"duplicate sweep combo {label}")
        seen.add(key)
    return jobs


def _run_sweep_job(payload: tuple[dict, dict]) -> dict:
    """Worker for one combo; takes (label, config echo) to stay picklable."""
    label, echo = payload
    from .training import evaluate, train
    from .config import config_from_echo

    cfg = config_from_echo(echo)
    samples = load_corpus(cfg.data_dir)
    result = train(cfg, samples)
    from .training import load_model_for_eval

    gen, cfg2 = load_model_for_eval(result.checkpoint)
    report = evaluate(samples, gen, cfg2)
    row = dict(label)
    row.update({k: f"{getattr(report, k):.4f}" for k in SWEEP_METRIC_COLS})
    return row


def cmd_sweep(args) -> int:
    base = build_config(
        parse_config_file(args.config) if args.config else None,
        {
            "data_dir": args.data,
            "out_dir": args.out,
            "iterations": args.iterations,
            "seed": args.seed,
            "optimizer": args.optimizer,
            "lr": args.lr,
            "swap_disc_labels": True if args.swap_disc_labels else None,
        },
    )
    if not base.data_dir or not base.out_dir:
        raise ConfigError("sweep needs --data and --out")
    load_corpus(base.data_dir)  # fail fast on data problems before any training
    jobs = _sweep_jobs(args.axis, base)
    out_root = Path(base.out_dir)
    payloads = []
    for i, (label, cfg) in enumerate(jobs):
        sub = out_root / f"{args.axis}_{i}"
        echo = cfg.echo()
        echo["out_dir"] = str(sub)
        payloads.append((label, echo))
    if args.parallel > 1:
        import multiprocessing as mp

        with mp.get_context("spawn").Pool(args.parallel) as pool:
            rows = pool.map(_run_sweep_job, payloads)
    else:
        rows = [_run_sweep_job(p) for p in payloads]
    csv_path = out_root / f"sweep_{args.axis}.csv"
    cols = list(jobs[0][0].keys()) + list(SWEEP_METRIC_COLS)
    out_root.mkdir(parents=True, exist_ok=True)
    with open(csv_path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=cols)
        w.writeheader()
        w.writerows(rows)
    print(f"wrote {csv_path} ({len(rows)} rows)")
    return 0


def _add_train_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--iterations", type=int)
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--lr", type=float)
    p.add_argument("--lambda1", type=float)
    p.add_argument("--lambda2", type=float)
    p.add_argument("--lambda3", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--ablate", type=lambda s: tuple(t.strip() for t in s.split(",") if t.strip()),
                   help=f"comma list from {ABLATABLE}")
    p.add_argument("--modalities", type=lambda s: tuple(t.strip() for t in s.split(",") if t.strip()))
    p.add_argument("--phases", type=lambda s: tuple(t.strip() for t in s.split(",") if t.strip()))
    p.add_argument("--swap-disc-labels", action="store_true", dest="swap_disc_labels")
    p.add_argument("--cswp-mode", choices=("hard", "soft"), dest="cswp_mode")
    p.add_argument("--optimizer", choices=("sgd", "adam"))
    p.add_argument("--checkpoint-every", type=int, dest="checkpoint_every")
    p.add_argument("--resume", help="checkpoint file to continue from")


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="adverseg",
                                 description="joint tumor segmentation/detection on synthetic MRI phantoms")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic corpus")
    g.add_argument("--out", required=True)
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--height", type=int, default=64)
    g.add_argument("--width", type=int, default=64)
    g.add_argument("--mix", default="0.2,0.4,0.4", help="class fractions none,hemangioma,hcc")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train on a corpus")
    t.add_argument("--data", help="corpus root")
    t.add_argument("--out", help="run directory for log + checkpoint")
    _add_train_flags(t)
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint (or the oracle) on a corpus")
    e.add_argument("--data", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--checkpoint")
    e.add_argument("--oracle", action="store_true", help="score ground truth against itself")
    e.add_argument("--figures", type=int, default=0, help="save overlays for the first N samples")
    e.add_argument("--dump-radiomics", action="store_true", dest="dump_radiomics")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("sweep", help="train/eval every combo along one axis")
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--axis", required=True, choices=("modalities", "phases", "ablations"))
    s.add_argument("--config", help="flat key=value config file")
    s.add_argument("--iterations", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--lr", type=float)
    s.add_argument("--optimizer", choices=("sgd", "adam"))
    s.add_argument("--swap-disc-labels", action="store_true", dest="swap_disc_labels")
    s.add_argument("--parallel", type=int, default=1)
    s.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return 3
    except NumericError as e:
        print(f"numeric error: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
