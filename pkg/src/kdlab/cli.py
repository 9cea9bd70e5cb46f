"""Command-line entry point: ``kdlab <command> [options]``.

Exit codes: 0 success, 1 failed check, 2 usage or config error, 3 diverged run.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .checks import gradcheck
from .config import DEFAULT_OUT, ENV_OUT, apply_overrides, load_config
from .distributions import grid_centers, make_teacher, prob_vector
from .errors import ConfigError, InvalidInputError, LabError, MissingFieldError, UndefinedRatioError
from .gradients import grad_target_decomposed
from .objectives import KINDS, ObjectiveSpec, decompose_rkl, rkl
from .textmetrics import PROMPT_FIELDS, evaluate_generations, read_generations
from .toy_lab import compare_objectives, mixture_toy, rho_probe, write_densities, write_trajectory
from .toy_lab.io import _fmt

log = logging.getLogger("kdlab")

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_DIVERGED = 0, 1, 2, 3


def _slug(spec: ObjectiveSpec) -> str:
    parts = [spec.kind]
    for k, v in spec.to_dict().items():
        if k != "kind":
            parts.append(f"{k.split('_')[0]}{v:g}")
    return re.sub(r"[^\w.-]", "", "_".join(parts))


def _unique_slugs(specs) -> list:
    seen: dict = {}
    out = []
    for s in specs:
        slug = _slug(s)
        n = seen.get(slug, 0)
        seen[slug] = n + 1
        out.append(slug if n == 0 else f"{slug}_{n}")
    return out


def _write_manifest(out: Path, command: str, cfg, artifacts, status="ok", extra=None):
    manifest = {
        "command": command,
        "version": __version__,
        "status": status,
        "seed": cfg.teacher.seed,
        "config": cfg.to_dict(),
        "artifacts": sorted(artifacts),
    }
    if extra:
        manifest.update(extra)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _resolve(args):
    cfg = load_config(args.config)
    return apply_overrides(cfg, seed=args.seed, objective=args.objective, out=args.out,
                           gamma=args.gamma, alpha=args.alpha, lambda_skew=args.lambda_,
                           beta_js=args.beta)


def cmd_fit(args) -> int:
    cfg = _resolve(args)
    if not cfg.objectives:
        raise ConfigError("no objectives configured; add [[objectives]] or pass --objective")
    base = cfg.run_config()
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    trajectories = compare_objectives(base, cfg.objectives)
    artifacts = []
    status = "ok"
    p = make_teacher(cfg.teacher)
    order = np.argsort(-p, kind="stable")
    if cfg.densities:
        write_densities(np.arange(p.size), p, out / "teacher.csv", ("class_index", "probability"))
        write_densities(np.arange(p.size), p[order], out / "teacher_sorted.csv", ("teacher_rank", "probability"))
        artifacts += ["teacher.csv", "teacher_sorted.csv"]
    for slug, traj in zip(_unique_slugs(cfg.objectives), trajectories):
        name = f"trajectory_{slug}.csv"
        write_trajectory(traj, out / name)
        artifacts.append(name)
        if traj.diverged:
            status = "diverged"
            print(f"{slug}: diverged ({traj.diverged}); partial trajectory kept", file=sys.stderr)
            continue
        last = traj.rows[-1]
        print(f"{slug}: step={last.step} loss={last.loss:.6g} trkl={last.trkl:.6g} "
              f"nrkl={last.nrkl:.6g} conf={last.confidence:.4f}")
        if cfg.densities:
            q = traj.final_student
            write_densities(np.arange(q.size), q, out / f"density_{slug}.csv", ("class_index", "probability"))
            write_densities(np.arange(q.size), q[order], out / f"density_{slug}_sorted.csv",
                            ("teacher_rank", "probability"))
            artifacts += [f"density_{slug}.csv", f"density_{slug}_sorted.csv"]
    _write_manifest(out, "fit", cfg, artifacts, status)
    return EXIT_DIVERGED if status == "diverged" else EXIT_OK


def cmd_mixture(args) -> int:
    cfg = _resolve(args)
    if not cfg.objectives:
        raise ConfigError("no objectives configured; add [[objectives]] or pass --objective")
    mcfg = cfg.mixture_config()
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    results = mixture_toy(mcfg, cfg.objectives)
    p = make_teacher(cfg.teacher)
    centers = grid_centers(cfg.teacher.edges)
    write_densities(centers, p, out / "teacher_density.csv")
    artifacts = ["teacher_density.csv", "params.csv"]
    status = "ok"
    with (out / "params.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["objective", "mean", "std", "peak_density", "teacher_peak_density", "std_clamped"])
        for slug, res in zip(_unique_slugs(cfg.objectives), results):
            if res is None:
                status = "diverged"
                print(f"{slug}: diverged", file=sys.stderr)
                continue
            w.writerow([slug, _fmt(res.mean), _fmt(res.std), _fmt(res.peak_density),
                        _fmt(res.teacher_peak_density), int(bool(res.warnings))])
            write_trajectory(res.trajectory, out / f"trajectory_{slug}.csv")
            write_densities(centers, res.density, out / f"density_{slug}.csv")
            artifacts += [f"trajectory_{slug}.csv", f"density_{slug}.csv"]
            print(f"{slug}: mean={res.mean:.4f} std={res.std:.4f} peak={res.peak_density:.4f} "
                  f"(teacher peak {res.teacher_peak_density:.4f})")
    _write_manifest(out, "mixture", cfg, artifacts, status)
    return EXIT_DIVERGED if status == "diverged" else EXIT_OK


def cmd_rho(args) -> int:
    cfg = _resolve(args)
    run = cfg.run_config(ObjectiveSpec("rkl"))
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    series = rho_probe(run)
    with (out / "rho.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "rho"])
        for step, rho in series:
            w.writerow([step, _fmt(rho)])
    head = max(1, len(series) // 10)
    print(f"rho at step 0: {series[0][1]:.4f}; max: {max(r for _, r in series):.4f}; "
          f"min over first {head} records: {min(r for _, r in series[:head]):.4f}")
    _write_manifest(out, "rho", cfg, ["rho.csv"])
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    if args.trials < 1:
        raise ConfigError("--trials must be at least 1")
    report = gradcheck(trials=args.trials, seed=args.seed or 0)
    for line in report.lines():
        print(line)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "gradcheck_worst.json").write_text(json.dumps(report.worst, indent=2, sort_keys=True) + "\n")
    if not report.ok:
        failed = {k: v for k, v in report.worst.items() if v.get("failed")}
        print("worst failing instances:", file=sys.stderr)
        print(json.dumps(failed, sort_keys=True), file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


def read_vector(path) -> np.ndarray:
    """Numbers from a file: a JSON array, or whitespace/comma separated values."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InvalidInputError(f"cannot read {path}: {exc.strerror}") from None
    text = text.strip()
    try:
        values = json.loads(text) if text.startswith("[") else [float(t) for t in re.split(r"[\s,]+", text) if t]
    except ValueError:
        raise InvalidInputError(f"{path}: not a list of numbers") from None
    if not isinstance(values, list) or not all(isinstance(v, (int, float)) for v in values):
        raise InvalidInputError(f"{path}: not a flat list of numbers")
    return np.array(values, dtype=np.float64)


def cmd_decompose(args) -> int:
    p = prob_vector(read_vector(args.p_file))
    q = prob_vector(read_vector(args.q_file))
    if p.shape != q.shape:
        raise InvalidInputError(f"length mismatch: {p.size} vs {q.size}")
    d = decompose_rkl(p, q, args.target)
    t = grad_target_decomposed(p, q, args.target)
    total = rkl(p, q)
    print(f"trkl                {d.trkl:.12g}")
    print(f"nrkl                {d.nrkl:.12g}")
    print(f"one_minus_qm        {d.weight:.12g}")
    print(f"total_rkl           {total:.12g}")
    print(f"trkl_grad_target    {t.trkl_grad:.12g}")
    print(f"nrkl_grad_target    {t.nrkl_grad:.12g}")
    print(f"combined_grad       {t.combined:.12g}")
    print(f"identity_residual   {abs(total - d.total_rkl):.3e}")
    return EXIT_OK


def cmd_evaltext(args) -> int:
    gens = read_generations(args.input)
    rows, agg = evaluate_generations(gens)
    out = Path(args.out or os.environ.get(ENV_OUT, DEFAULT_OUT))
    out.mkdir(parents=True, exist_ok=True)
    with (out / "textmetrics.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PROMPT_FIELDS)
        for r in rows + [agg]:
            w.writerow([r["prompt_id"]] + [_fmt(r[k]) for k in PROMPT_FIELDS[1:]])
    print("  ".join(f"{k}={_fmt(agg[k]) or 'n/a'}" for k in PROMPT_FIELDS[1:]))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kdlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"kdlab {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def configured(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=True, help="TOML config or JSON manifest")
        sp.add_argument("--out", help="output directory (overrides config and $KDLAB_OUT)")
        sp.add_argument("--seed", type=int, help="teacher / init seed (unsigned 64-bit)")
        sp.add_argument("--objective", choices=KINDS, help="run only this objective")
        sp.add_argument("--gamma", type=float)
        sp.add_argument("--alpha", type=float)
        sp.add_argument("--lambda", dest="lambda_", type=float)
        sp.add_argument("--beta", type=float)
        sp.set_defaults(func=fn)
        return sp

    configured("fit", cmd_fit, "fit student logits to a teacher under each objective")
    configured("mixture", cmd_mixture, "unimodal Gaussian student vs discretized mixture teacher")
    configured("rho", cmd_rho, "RKL/FKL gradient-norm ratio along an RKL run")

    sp = sub.add_parser("gradcheck", help="analytic gradients vs finite differences")
    sp.add_argument("--trials", type=int, default=200)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_gradcheck)

    sp = sub.add_parser("decompose", help="target/non-target split of RKL for two vectors")
    sp.add_argument("p_file")
    sp.add_argument("q_file")
    sp.add_argument("target", type=int)
    sp.set_defaults(func=cmd_decompose)

    sp = sub.add_parser("evaltext", help="ROUGE-L, Distinct-2, Self-BLEU and confidence on a JSONL file")
    sp.add_argument("input")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_evaltext)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UndefinedRatioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECK
    except (ConfigError, InvalidInputError, MissingFieldError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except LabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
