"""Command-line entry point: prepare, tune, ablate, stability, report."""

from __future__ import annotations

import argparse
import csv
import glob
import io
import json
import os
import sys
import time

import numpy as np

from . import dataset as ds
from .experiment import ConfigError, ExperimentConfig, RunRecord, mean_std, write_json, write_text
from .metrics import ACCURACY_METRICS, ALL_METRICS, MetricReport
from .registry import MODELS, Objective, refit_and_test, resolve_models
from .tuning import Journal, run_study

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _stamp(cfg):
    return {"config_hash": cfg.hash(), "seed": cfg.seed}


def _csv_text(rows, cfg, columns=None):
    buf = io.StringIO()
    buf.write(f"# config_hash={cfg.hash()} seed={cfg.seed}\n")
    if rows:
        columns = columns or list(rows[0])
        writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (f"{v:.10g}" if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


# ---------------------------------------------------------------- prepare

def split_dir(cfg):
    return os.path.join(cfg.out, "split")


def cmd_prepare(cfg, log=print):
    """Load the raw file, split it, and write matrices, id maps and a manifest."""
    if not cfg.dataset:
        raise UsageError("no dataset given (--dataset or 'dataset =' in the config)")
    if not os.path.exists(cfg.dataset):
        raise FileNotFoundError(f"dataset not found: {cfg.dataset}")
    m = ds.load_interactions(cfg.dataset, cfg.layout, cfg.rating_threshold)
    split = ds.make_split(m, cfg.test_train_ratio, cfg.validation_train_ratio, cfg.seed)
    out = split_dir(cfg)
    os.makedirs(out, exist_ok=True)
    stamp = _stamp(cfg)
    parts = {"train": split.train, "validation": split.validation, "test": split.test}
    for name, part in parts.items():
        ds.save_matrix(os.path.join(out, f"{name}.npz"), part, part_name=name, **stamp)
    header = f"config_hash={stamp['config_hash']} seed={cfg.seed}"
    ds.write_id_map(os.path.join(out, "row_ids.txt"), m.row_ids, header=header)
    ds.write_id_map(os.path.join(out, "col_ids.txt"), m.col_ids, header=header)
    manifest = {**stamp, "dataset": os.path.abspath(cfg.dataset), "layout": cfg.layout,
                "test_train_ratio": cfg.test_train_ratio,
                "validation_train_ratio": cfg.validation_train_ratio,
                "shape": list(m.shape), "nnz": {k: v.nnz for k, v in parts.items()}, "nnz_total": m.nnz}
    write_json(os.path.join(out, "manifest.json"), manifest)
    log(f"prepared {m.shape[0]} x {m.shape[1]} matrix: " +
        ", ".join(f"{k} {v.nnz}" for k, v in parts.items()))
    return split


def load_split(cfg):
    out = split_dir(cfg)
    if not os.path.exists(os.path.join(out, "manifest.json")):
        return cmd_prepare(cfg, log=lambda *_: None)
    mats = {}
    for name in ("train", "validation", "test"):
        mats[name], _ = ds.load_matrix(os.path.join(out, f"{name}.npz"))
    return ds.DatasetSplit(mats["train"], mats["test"], mats["validation"])


# ---------------------------------------------------------------- tune

def _model_dir(cfg, sub, name):
    return os.path.join(cfg.out, sub, name)


def _record(name, cfg, kind, report, fit_times, rec_time, n_rows, params, extra=None):
    mu, sd = mean_std(fit_times)
    return RunRecord(model=name, config_hash=cfg.hash(), seed=cfg.seed, kind=kind,
                     metrics=report.to_dict(), train_time_mean=mu, train_time_std=sd,
                     rec_time=rec_time, throughput=(n_rows / rec_time if rec_time > 0 else 0.0),
                     params=params, extra=extra or {})


def _check_journal(journal, stamp):
    """Refuse to resume a journal written under a different configuration."""
    if not os.path.exists(journal.path):
        return
    with open(journal.path) as fh:
        for line in fh:
            if line.strip():
                found = json.loads(line).get("config_hash")
                if found != stamp["config_hash"]:
                    raise ConfigError(f"{journal.path} was written by config {found}, "
                                      f"not {stamp['config_hash']}; use another --out")


def tune_model(name, split, cfg, log=print):
    spec = MODELS[name]
    options = cfg.cfgan_options()
    outdir = _model_dir(cfg, "tune", name)
    os.makedirs(outdir, exist_ok=True)
    stamp = _stamp(cfg)
    journal = Journal(os.path.join(outdir, "journal.jsonl"), header={"model": name, **stamp})
    _check_journal(journal, stamp)

    def show(trial):
        log(f"  {name} trial {trial.number}: {trial.status} NDCG@10={trial.value:.4f}"
            + (f" epochs={trial.epochs}" if trial.epochs else ""))

    def refit(best):
        return refit_and_test(name, split, best.params, cfg.seed, options, epochs=best.epochs,
                              cutoffs=cfg.cutoffs)

    result = run_study(Objective(name, split, options), spec.space, n_total=cfg.n_trials,
                       n_random=cfg.n_random, seed=cfg.seed, journal=journal, refit=refit,
                       workers=cfg.workers, log=show)
    report, fit_s, rank_s, n_rows = result.final
    best = result.best
    write_json(os.path.join(outdir, "best.json"),
               {**stamp, "model": name, "params": best.params, "trial": best.number,
                "validation_ndcg10": best.value, "epochs": best.epochs,
                "space": {k: v.to_dict() for k, v in spec.space.items()}})
    write_text(os.path.join(outdir, "report.csv"), _csv_text(report.to_rows(), cfg))
    write_text(os.path.join(outdir, "report.json"), report.to_json(**stamp) + "\n")
    fit_times = [t.fit_seconds for t in result.trials if t.ok]
    rec = _record(name, cfg, "tune", report, fit_times, rank_s, n_rows, best.params,
                  {"epochs": best.epochs, "final_fit_seconds": fit_s,
                   "failed_trials": sum(not t.ok for t in result.trials)})
    rec.save(os.path.join(outdir, "record.json"))
    return rec


def cmd_tune(cfg, log=print):
    names = resolve_models(cfg.models)
    split = load_split(cfg)
    failures = {}
    records = {}
    for name in names:
        log(f"tuning {name}")
        try:
            records[name] = tune_model(name, split, cfg, log)
            log(f"{name}: test NDCG@{max(cfg.cutoffs)} = "
                f"{records[name].metrics['metrics'][str(max(cfg.cutoffs))]['NDCG']:.4f}")
        except Exception as exc:  # one failing model must not abort the others
            failures[name] = f"{type(exc).__name__}: {exc}"
            log(f"{name} failed: {failures[name]}")
    return records, failures


# ---------------------------------------------------------------- ablate

ABLATIONS = ("ES", "NO-ES", "CC", "RN-50", "RN-100", "RN-200")


def _load_best(cfg, name):
    path = cfg.params_file or os.path.join(_model_dir(cfg, "tune", name), "best.json")
    if not os.path.exists(path):
        raise FileNotFoundError(f"no best-config file for {name}: {path}")
    with open(path) as fh:
        best = json.load(fh)
    if best.get("model", name) != name:
        raise ConfigError(f"{path} holds parameters of {best['model']}, not {name}")
    return best


def _noise_size(split, mode, fraction):
    width = split.train.num_cols if mode == "user" else split.train.num_rows
    return int(round(fraction * width))


def ablate_model(name, split, cfg, switches=ABLATIONS, log=print):
    spec = MODELS[name]
    if spec.kind != "cfgan":
        raise ConfigError(f"ablations apply to CFGAN models, not {name}")
    best = _load_best(cfg, name)
    params = best["params"]
    rows = []
    stamp = _stamp(cfg)
    for switch in switches:
        changes = {}
        if switch == "NO-ES":
            changes["early_stopping"] = False
        elif switch == "CC":
            changes["condition"] = "class"
        elif switch.startswith("RN-"):
            changes["noise_fraction"] = int(switch[3:]) / 100.0
        opts = cfg.cfgan_options(**changes)
        t0 = time.perf_counter()
        if opts.early_stopping:
            obj = Objective(name, split, opts)
            epochs = obj(params, cfg.seed).epochs
        else:
            epochs = opts.max_epochs
        report, fit_s, rank_s, n_rows = refit_and_test(name, split, params, cfg.seed, opts,
                                                       epochs=epochs, cutoffs=cfg.cutoffs)
        label = f"{spec.fixed['mode'][0]}{spec.fixed['variant']} {switch}"
        if switch.startswith("RN-"):
            label = f"{spec.fixed['mode'][0]}{spec.fixed['variant']} RN-{_noise_size(split, spec.fixed['mode'], opts.noise_fraction)}"
        for row in report.to_rows():
            row.update({"model": label, "switch": switch, "epochs": epochs,
                        "train_seconds": time.perf_counter() - t0})
            rows.append(row)
        log(f"  {label}: epochs={epochs} NDCG@{max(cfg.cutoffs)}="
            f"{report.get('NDCG', max(cfg.cutoffs)):.4f}")
    outdir = _model_dir(cfg, "ablate", name)
    columns = ["model", "switch", "epochs", "cutoff", *ALL_METRICS, "train_seconds"]
    write_text(os.path.join(outdir, "ablation.csv"), _csv_text(rows, cfg, columns))
    write_json(os.path.join(outdir, "ablation.json"), {**stamp, "model": name, "params": params, "rows": rows})
    return rows


def cmd_ablate(cfg, log=print):
    names = resolve_models(cfg.models)
    split = load_split(cfg)
    failures, results = {}, {}
    for name in names:
        log(f"ablating {name}")
        try:
            results[name] = ablate_model(name, split, cfg, log=log)
        except (FileNotFoundError, ConfigError):
            raise
        except Exception as exc:
            failures[name] = f"{type(exc).__name__}: {exc}"
            log(f"{name} failed: {failures[name]}")
    return results, failures


# ---------------------------------------------------------------- stability

def stability_model(name, split, cfg, log=print):
    spec = MODELS[name]
    if spec.space:
        best = _load_best(cfg, name)
        params, epochs = best["params"], best.get("epochs")
    else:
        params, epochs = {}, None
    opts = cfg.cfgan_options()
    if spec.kind == "cfgan" and epochs is None:
        epochs = opts.max_epochs
    reports, fit_times, rank_times, n_rows = [], [], [], 0
    for r in range(cfg.repeats):
        seed = cfg.seed * 1000 + r
        report, fit_s, rank_s, n_rows = refit_and_test(name, split, params, seed, opts, epochs=epochs,
                                                       cutoffs=cfg.cutoffs)
        reports.append(report)
        fit_times.append(fit_s)
        rank_times.append(rank_s)
        log(f"  {name} repeat {r + 1}/{cfg.repeats} seed={seed}: "
            f"NDCG@{max(cfg.cutoffs)}={report.get('NDCG', max(cfg.cutoffs)):.4f}")
    summary = {}
    for c in cfg.cutoffs:
        summary[c] = {}
        for m in ALL_METRICS:
            mu, sd = mean_std(rep.get(m, c) for rep in reports)
            summary[c][m] = {"mean": mu, "std": sd}
    rows = [{"model": name, "cutoff": c, "repeats": cfg.repeats,
             **{f"{m}_mean": summary[c][m]["mean"] for m in ALL_METRICS},
             **{f"{m}_std": summary[c][m]["std"] for m in ALL_METRICS}} for c in cfg.cutoffs]
    outdir = _model_dir(cfg, "stability", name)
    stamp = _stamp(cfg)
    write_text(os.path.join(outdir, "stability.csv"), _csv_text(rows, cfg))
    write_json(os.path.join(outdir, "stability.json"),
               {**stamp, "model": name, "params": params, "epochs": epochs,
                "seeds": [cfg.seed * 1000 + r for r in range(cfg.repeats)],
                "summary": {str(c): v for c, v in summary.items()},
                "runs": [rep.to_dict() for rep in reports]})
    mean_report = MetricReport({c: {m: summary[c][m]["mean"] for m in ALL_METRICS} for c in cfg.cutoffs},
                               reports[0].n_evaluated, name)
    rec = _record(name, cfg, "stability", mean_report, fit_times, float(np.mean(rank_times)), n_rows, params,
                  {"repeats": cfg.repeats, "std": {str(c): {m: summary[c][m]["std"] for m in ALL_METRICS}
                                                   for c in cfg.cutoffs}})
    rec.save(os.path.join(outdir, "record.json"))
    return summary


def cmd_stability(cfg, log=print):
    names = resolve_models(cfg.models)
    split = load_split(cfg)
    return {name: stability_model(name, split, cfg, log) for name in names}


# ---------------------------------------------------------------- report

TIMING_COLUMNS = ["model", "kind", "train_time_mean", "train_time_std", "rec_time", "throughput"]


def _render_table(rows, columns, best_cols):
    """Fixed-width text table; the best value of each metric column gets a '*'."""
    best = {}
    for col in best_cols:
        vals = [r[col] for r in rows if isinstance(r.get(col), float) and np.isfinite(r[col])]
        if vals:
            best[col] = max(vals)
    cells = [columns]
    for r in rows:
        line = []
        for col in columns:
            v = r.get(col, "")
            if isinstance(v, float):
                text = f"{v:.4f}" + ("*" if col in best and v == best[col] else " ")
            else:
                text = str(v)
            line.append(text)
        cells.append(line)
    widths = [max(len(row[i]) for row in cells) for i in range(len(columns))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in cells) + "\n"


def cmd_report(cfg, log=print):
    paths = sorted(glob.glob(os.path.join(cfg.out, "*", "*", "record.json")))
    if not paths:
        raise FileNotFoundError(f"no run records under {cfg.out}")
    records = [RunRecord.load(p) for p in paths]
    result_rows, timing_rows = [], []
    for rec in records:
        report = MetricReport.from_dict(rec.metrics)
        for row in report.to_rows(kind=rec.kind):
            row["model"] = rec.model
            result_rows.append(row)
        timing_rows.append({k: getattr(rec, k) for k in TIMING_COLUMNS})
    result_rows.sort(key=lambda r: (r["cutoff"], r["kind"], r["model"]))
    outdir = os.path.join(cfg.out, "report")
    result_cols = ["model", "kind", "cutoff", *ALL_METRICS]
    write_text(os.path.join(outdir, "results.csv"), _csv_text(result_rows, cfg, result_cols))
    write_text(os.path.join(outdir, "timing.csv"), _csv_text(timing_rows, cfg, TIMING_COLUMNS))
    text = [f"# config_hash={cfg.hash()} seed={cfg.seed}\n"]
    for c in sorted({r["cutoff"] for r in result_rows}):
        text.append(f"\n@ {c}\n")
        text.append(_render_table([r for r in result_rows if r["cutoff"] == c], result_cols,
                                  ACCURACY_METRICS + ("Novelty", "CovItem", "DivMIL", "DivGini", "DivShannon")))
    text.append("\nTiming (seconds; throughput in rows/s)\n")
    text.append(_render_table(timing_rows, TIMING_COLUMNS, ()))
    write_text(os.path.join(outdir, "results.txt"), "".join(text))
    log("".join(text))
    return result_rows, timing_rows


# ---------------------------------------------------------------- main

COMMANDS = {"prepare": cmd_prepare, "tune": cmd_tune, "ablate": cmd_ablate,
            "stability": cmd_stability, "report": cmd_report}


def build_parser():
    parser = argparse.ArgumentParser(prog="cfbench", description="Collaborative-filtering experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=(fn.__doc__ or "").strip().split("\n")[0] or None)
        p.add_argument("--config", help="flat key = value experiment file")
        p.add_argument("--dataset", help="raw interaction file")
        p.add_argument("--models", help="comma-separated models or groups (baselines, cfgan, knn, all)")
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--out", help="output directory")
        if name == "stability":
            p.add_argument("--repeats", type=int)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
        cfg = cfg.with_overrides(dataset=args.dataset, models=args.models, seed=args.seed,
                                 workers=args.workers, out=args.out,
                                 repeats=getattr(args, "repeats", None))
        if args.command != "prepare":
            resolve_models(cfg.models)
        result = COMMANDS[args.command](cfg)
    except (ConfigError, UsageError, FileNotFoundError, ds.ParseError, OSError) as exc:
        print(f"cfbench {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:
        print(f"cfbench {args.command}: experiment failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    if isinstance(result, tuple) and len(result) == 2 and isinstance(result[1], dict) and result[1]:
        print(f"cfbench {args.command}: {len(result[1])} model(s) failed: {', '.join(result[1])}",
              file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
