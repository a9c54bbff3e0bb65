"""The ``vidsum`` command line: validate, synthesize, generate, train, score.

Every command reads and writes the JSON formats owned by the library
modules. Commands that produce files drop a ``manifest.json`` next to them
recording the command, inputs, flags, seed and tool version; rerunning with
the same manifest reproduces every output byte for byte (the manifest's own
timestamp being the one exception).

Exit codes: 0 success, 1 validation or quality failure, 2 usage or IO error.
"""

from __future__ import annotations

import json
import warnings
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import click

from . import __version__
from .annotation import (
    AnnotationParseError,
    AnnotationReferenceError,
    load_annotation,
    load_summary,
    save_annotation,
    save_summary,
    validate,
)
from .gtgen import (
    DEFAULT_GRID_LEVELS,
    baseline_random,
    baseline_uniform,
    build_reference_bank,
    config_grid,
    load_reference_bank,
    save_reference_bank,
)
from .learn import (
    TrainConfig,
    TrainDivergenceError,
    feature_bundle,
    infer as model_infer,
    load_model,
    load_scores,
    save_model,
    train as train_model,
)
from .measures import (
    format_report_table,
    measure_report,
    report_from_dict,
    report_to_dict,
)
from .optimize import knapsack_select
from .synth import corpus_spec_from_options, synth_video


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    raise SystemExit(code)


def _load_annotation_checked(path: Path):
    try:
        return load_annotation(path)
    except (AnnotationParseError, AnnotationReferenceError, OSError) as exc:
        _fail(2, str(exc))


def _write_manifest(outdir: Path, command: str, inputs, flags: dict, seed: int) -> None:
    manifest = {
        "command": command,
        "inputs": [str(p) for p in inputs],
        "flags": flags,
        "seed": seed,
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    (outdir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _echo_warnings(caught) -> None:
    for w in caught:
        click.echo(f"warning: {w.message}", err=True)


@click.group()
@click.version_option(__version__, prog_name="vidsum")
@click.option("--seed", type=int, default=0, show_default=True, help="Root seed for all randomness.")
@click.option("--jobs", type=int, default=1, show_default=True, help="Worker processes for per-video work.")
@click.option("--budget-min-pct", type=float, default=1.0, show_default=True, help="Lower budget window bound, percent of video duration.")
@click.option("--budget-max-pct", type=float, default=5.0, show_default=True, help="Upper budget window bound, percent of video duration.")
@click.option("--output-dir", type=click.Path(path_type=Path), default=Path("out"), show_default=True, help="Directory for generated files.")
@click.pass_context
def main(ctx, seed, jobs, budget_min_pct, budget_max_pct, output_dir):
    """Summary machinery over concept-annotated videos."""
    if jobs < 1:
        raise click.UsageError("--jobs must be at least 1")
    if not 0 < budget_min_pct <= budget_max_pct:
        raise click.UsageError("need 0 < --budget-min-pct <= --budget-max-pct")
    ctx.obj = {
        "seed": seed,
        "jobs": jobs,
        "min_pct": budget_min_pct,
        "max_pct": budget_max_pct,
        "outdir": output_dir,
    }


def _outdir(ctx) -> Path:
    out = ctx.obj["outdir"]
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# validate

@main.command("validate")
@click.argument("paths", nargs=-1, required=True, type=click.Path(path_type=Path))
def cmd_validate(paths):
    """Check annotation files against every schema invariant."""
    any_bad = False
    for path in paths:
        try:
            a = load_annotation(path, strict=False)
        except (AnnotationParseError, OSError) as exc:
            _fail(2, str(exc))
        report = validate(a)
        if report.ok:
            click.echo(f"{path}: OK")
        else:
            any_bad = True
            click.echo(f"{path}: {len(report.violations)} violation(s)")
            for line in str(report).splitlines():
                click.echo(f"  {line}")
    raise SystemExit(1 if any_bad else 0)


# ---------------------------------------------------------------------------
# synth

def _synth_worker(args):
    spec, seed, index = args
    return synth_video(spec, seed, index)


@main.command("synth")
@click.option("--n-videos", type=int, default=1, show_default=True)
@click.option("--n-snippets", type=int, default=100, show_default=True)
@click.option("--n-mega-events", type=int, default=0, show_default=True)
@click.option("--mega-len-min", type=int, default=2, show_default=True)
@click.option("--mega-len-max", type=int, default=4, show_default=True)
@click.option("--keywords-min", type=int, default=1, show_default=True)
@click.option("--keywords-max", type=int, default=3, show_default=True)
@click.option("--persistence", type=float, default=0.3, show_default=True, help="Chance a snippet repeats its predecessor's keywords.")
@click.option("--domain", type=str, default="synthetic", show_default=True)
@click.option("--prefix", type=str, default="synth", show_default=True)
@click.pass_context
def cmd_synth(ctx, n_videos, n_snippets, n_mega_events, mega_len_min, mega_len_max,
              keywords_min, keywords_max, persistence, domain, prefix):
    """Generate a synthetic annotation corpus."""
    try:
        spec = corpus_spec_from_options(
            n_videos=n_videos,
            n_snippets=n_snippets,
            n_mega_events=n_mega_events,
            mega_event_length=(mega_len_min, mega_len_max),
            keywords_per_snippet=(keywords_min, keywords_max),
            keyword_persistence=persistence,
            domain=domain,
            video_id_prefix=prefix,
        )
        seed = ctx.obj["seed"]
        tasks = [(spec, seed, i) for i in range(n_videos)]
        if ctx.obj["jobs"] > 1:
            with ProcessPoolExecutor(max_workers=ctx.obj["jobs"]) as pool:
                annotations = list(pool.map(_synth_worker, tasks))
        else:
            annotations = [_synth_worker(t) for t in tasks]
    except ValueError as exc:
        _fail(2, str(exc))

    outdir = _outdir(ctx)
    for a in annotations:
        save_annotation(a, outdir / f"{a.video_id}.json")
    _write_manifest(
        outdir,
        "synth",
        [],
        {
            "n_videos": n_videos,
            "n_snippets": n_snippets,
            "n_mega_events": n_mega_events,
            "mega_len": [mega_len_min, mega_len_max],
            "keywords": [keywords_min, keywords_max],
            "persistence": persistence,
            "domain": domain,
            "prefix": prefix,
            "jobs": ctx.obj["jobs"],
        },
        seed,
    )
    click.echo(f"wrote {len(annotations)} annotation(s) to {outdir}")


# ---------------------------------------------------------------------------
# generate-gt

@main.command("generate-gt")
@click.argument("annotation", type=click.Path(path_type=Path))
@click.option("--grid-levels", type=str, default=",".join(str(v) for v in DEFAULT_GRID_LEVELS),
              show_default=True, help="Comma-separated mixture weight levels.")
@click.option("--n-summaries", type=int, default=100, show_default=True)
@click.pass_context
def cmd_generate_gt(ctx, annotation, grid_levels, n_summaries):
    """Build the reference summary bank for one annotated video."""
    a = _load_annotation_checked(annotation)
    report = validate(a)
    if not report.ok:
        click.echo(str(report), err=True)
        _fail(1, f"{annotation} fails validation; refusing to generate")
    try:
        levels = tuple(float(v) for v in grid_levels.split(","))
        grid = config_grid(levels)
    except ValueError as exc:
        _fail(2, f"bad --grid-levels: {exc}")

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        bank = build_reference_bank(
            a,
            grid,
            n_target=n_summaries,
            seed=ctx.obj["seed"],
            min_pct=ctx.obj["min_pct"],
            max_pct=ctx.obj["max_pct"],
        )
    _echo_warnings(caught)

    outdir = _outdir(ctx)
    save_reference_bank(bank, outdir)
    _write_manifest(
        outdir,
        "generate-gt",
        [annotation],
        {
            "grid_levels": list(levels),
            "n_summaries": n_summaries,
            "budget_window_pct": [ctx.obj["min_pct"], ctx.obj["max_pct"]],
        },
        ctx.obj["seed"],
    )
    click.echo(f"wrote {bank.n} reference summaries to {outdir}")


# ---------------------------------------------------------------------------
# evaluate

def _evaluate_worker(args):
    candidate_path, annotation_path, bank_dir, budget_pct, threshold = args
    a = load_annotation(annotation_path)
    s = load_summary(candidate_path, a)
    if s.video_id != a.video_id:
        raise ValueError(
            f"candidate {candidate_path} is for video {s.video_id!r}, "
            f"annotation is {a.video_id!r}"
        )
    refs = None
    if bank_dir is not None:
        refs = list(load_reference_bank(bank_dir, a).summaries)
    budget = None if budget_pct is None else budget_pct / 100.0 * a.duration
    r = measure_report(s, a, references=refs, budget=budget, sim_threshold=threshold)
    return Path(candidate_path).stem, report_to_dict(r)


@main.command("evaluate")
@click.argument("candidates", nargs=-1, required=True, type=click.Path(path_type=Path))
@click.option("--annotation", "annotation_path", required=True, type=click.Path(path_type=Path))
@click.option("--bank", "bank_dir", type=click.Path(path_type=Path), default=None,
              help="Reference bank directory; enables AF1/MF1 columns.")
@click.option("--budget-pct", type=float, default=None,
              help="Normalization budget as percent of duration; defaults to each candidate's own duration.")
@click.option("--time-iou", type=float, default=0.5, show_default=True,
              help="Keyword IoU threshold joining consecutive snippets into time clusters.")
@click.pass_context
def cmd_evaluate(ctx, candidates, annotation_path, bank_dir, budget_pct, time_iou):
    """Score candidate summaries on all measures, and against a bank if given."""
    _load_annotation_checked(annotation_path)  # surface parse errors early
    tasks = [(str(c), str(annotation_path), None if bank_dir is None else str(bank_dir),
              budget_pct, time_iou) for c in candidates]
    try:
        if ctx.obj["jobs"] > 1:
            with ProcessPoolExecutor(max_workers=ctx.obj["jobs"]) as pool:
                rows = list(pool.map(_evaluate_worker, tasks))
        else:
            rows = [_evaluate_worker(t) for t in tasks]
    except (AnnotationParseError, AnnotationReferenceError, ValueError, OSError) as exc:
        _fail(2, str(exc))

    outdir = _outdir(ctx)
    payload = {"reports": [{"label": label, **d} for label, d in rows]}
    (outdir / "evaluation.json").write_text(
        json.dumps(payload, indent=2) + "\n", encoding="utf-8"
    )
    _write_manifest(
        outdir,
        "evaluate",
        list(candidates) + [annotation_path] + ([bank_dir] if bank_dir else []),
        {"budget_pct": budget_pct, "time_iou": time_iou, "jobs": ctx.obj["jobs"]},
        ctx.obj["seed"],
    )
    click.echo(format_report_table([(label, report_from_dict(d)) for label, d in rows]))


# ---------------------------------------------------------------------------
# baseline

@main.command("baseline")
@click.option("--annotation", "annotation_path", required=True, type=click.Path(path_type=Path))
@click.option("--kind", type=click.Choice(["random", "uniform"]), default="random", show_default=True)
@click.option("--budget-pct", type=float, default=5.0, show_default=True)
@click.option("--count", type=int, default=1, show_default=True,
              help="Number of random baselines (uniform is deterministic, always 1).")
@click.pass_context
def cmd_baseline(ctx, annotation_path, kind, budget_pct, count):
    """Write random or evenly spaced baseline summaries."""
    a = _load_annotation_checked(annotation_path)
    if count < 1:
        raise click.UsageError("--count must be at least 1")
    budget = budget_pct / 100.0 * a.duration
    if budget <= 0:
        _fail(2, "budget is zero; check --budget-pct")

    outdir = _outdir(ctx)
    names = []
    if kind == "uniform":
        s = baseline_uniform(a, budget)
        name = "baseline_uniform_000.json"
        save_summary(s, outdir / name)
        names.append(name)
    else:
        for i in range(count):
            s = baseline_random(a, budget, seed=ctx.obj["seed"] + i)
            name = f"baseline_random_{i:03d}.json"
            save_summary(s, outdir / name)
            names.append(name)
    _write_manifest(
        outdir,
        "baseline",
        [annotation_path],
        {"kind": kind, "budget_pct": budget_pct, "count": count},
        ctx.obj["seed"],
    )
    click.echo(f"wrote {len(names)} {kind} baseline(s) to {outdir}")


# ---------------------------------------------------------------------------
# train

def _parse_loss_weights(text: str | None):
    if text is None:
        return None
    out = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        name, _, value = part.partition("=")
        if not value:
            raise click.UsageError(f"bad --loss-weights entry {part!r}; expected NAME=VALUE")
        out[name.strip()] = float(value)
    return out


@main.command("train")
@click.option("--annotation", "annotation_paths", multiple=True, required=True,
              type=click.Path(path_type=Path), help="One per training video, order-matched with --bank.")
@click.option("--bank", "bank_dirs", multiple=True, required=True, type=click.Path(path_type=Path))
@click.option("--scores", "score_paths", multiple=True, type=click.Path(path_type=Path),
              help="Optional external importance scores, order-matched when given.")
@click.option("--epochs", type=int, default=15, show_default=True)
@click.option("--eta0", type=float, default=0.1, show_default=True)
@click.option("--lam-reg", type=float, default=1e-4, show_default=True)
@click.option("--budget-policy", type=click.Choice(["reference", "fixed"]), default="reference", show_default=True)
@click.option("--budget-pct", type=float, default=5.0, show_default=True)
@click.option("--loss-weights", type=str, default=None,
              help="Comma list like 'F1=1' or 'F1=0.5,IMP=0.5'; default uniform.")
@click.option("--loss-scale", type=float, default=None,
              help="Margin scale kappa; default calibrates to mean reference score.")
@click.pass_context
def cmd_train(ctx, annotation_paths, bank_dirs, score_paths, epochs, eta0, lam_reg,
              budget_policy, budget_pct, loss_weights, loss_scale):
    """Fit mixture weights against reference banks."""
    if len(annotation_paths) != len(bank_dirs):
        raise click.UsageError("--annotation and --bank counts must match")
    if score_paths and len(score_paths) != len(annotation_paths):
        raise click.UsageError("--scores count must match --annotation when given")

    corpus = []
    try:
        for i, (apath, bdir) in enumerate(zip(annotation_paths, bank_dirs)):
            a = load_annotation(apath)
            scores = None
            if score_paths:
                vid, scores = load_scores(score_paths[i])
                if vid != a.video_id:
                    raise ValueError(
                        f"scores {score_paths[i]} are for video {vid!r}, annotation is {a.video_id!r}"
                    )
            f = feature_bundle(a, scores)
            bank = load_reference_bank(bdir, a)
            corpus.append((a, f, bank))
    except (AnnotationParseError, AnnotationReferenceError, ValueError, OSError) as exc:
        _fail(2, str(exc))

    cfg = TrainConfig(
        epochs=epochs,
        eta0=eta0,
        lam_reg=lam_reg,
        budget_policy=budget_policy,
        budget_pct=budget_pct,
        loss_weights=_parse_loss_weights(loss_weights),
        loss_scale=loss_scale,
        seed=ctx.obj["seed"],
    )
    try:
        model = train_model(corpus, cfg)
    except TrainDivergenceError as exc:
        click.echo(f"objective trace: {list(exc.trace)}", err=True)
        _fail(1, str(exc))
    except ValueError as exc:
        _fail(2, str(exc))

    outdir = _outdir(ctx)
    save_model(model, outdir / "model.json")
    _write_manifest(
        outdir,
        "train",
        list(annotation_paths) + list(bank_dirs) + list(score_paths),
        {
            "epochs": epochs,
            "eta0": eta0,
            "lam_reg": lam_reg,
            "budget_policy": budget_policy,
            "budget_pct": budget_pct,
            "loss_weights": loss_weights,
            "loss_scale": loss_scale,
        },
        ctx.obj["seed"],
    )
    prov = model.provenance
    click.echo(
        f"trained: w_fl={model.w_fl:.6f} w_imp={model.w_imp:.6f} "
        f"best objective {prov['best_objective']:.6f} at epoch {prov['best_epoch']} "
        f"(initial {prov['initial_objective']:.6f})"
    )


# ---------------------------------------------------------------------------
# infer

@main.command("infer")
@click.option("--annotation", "annotation_path", required=True, type=click.Path(path_type=Path))
@click.option("--model", "model_path", type=click.Path(path_type=Path), default=None)
@click.option("--scores", "scores_path", type=click.Path(path_type=Path), default=None,
              help="External per-snippet scores; without --model these drive a knapsack selection.")
@click.option("--budget-pct", type=float, default=5.0, show_default=True)
@click.pass_context
def cmd_infer(ctx, annotation_path, model_path, scores_path, budget_pct):
    """Produce a summary from a trained model or from external scores."""
    if model_path is None and scores_path is None:
        raise click.UsageError("need --model, --scores, or both")
    a = _load_annotation_checked(annotation_path)
    budget = budget_pct / 100.0 * a.duration

    scores = None
    if scores_path is not None:
        try:
            vid, scores = load_scores(scores_path)
        except (OSError, ValueError, KeyError) as exc:
            _fail(2, f"{scores_path}: {exc}")
        if vid != a.video_id:
            _fail(2, f"scores are for video {vid!r}, annotation is {a.video_id!r}")

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            if model_path is None:
                s = knapsack_select(list(scores), a, budget)
            else:
                model = load_model(model_path)
                f = feature_bundle(a, scores)
                s = model_infer(model, f, a, budget, ctx.obj["min_pct"], ctx.obj["max_pct"])
        except (OSError, ValueError, KeyError) as exc:
            _fail(2, str(exc))
    _echo_warnings(caught)

    outdir = _outdir(ctx)
    save_summary(s, outdir / "summary.json")
    _write_manifest(
        outdir,
        "infer",
        [annotation_path] + [p for p in (model_path, scores_path) if p],
        {"budget_pct": budget_pct},
        ctx.obj["seed"],
    )
    click.echo(
        f"selected {len(s.indices)} snippet(s), duration {s.total_duration:.1f}s "
        f"of budget {budget:.1f}s"
    )


# ---------------------------------------------------------------------------
# report

@main.command("report")
@click.argument("inputs", nargs=-1, type=click.Path(path_type=Path))
@click.option("--bank", "bank_dir", type=click.Path(path_type=Path), default=None,
              help="Render a bank's leave-one-out consistency instead of evaluation files.")
@click.option("--annotation", "annotation_path", type=click.Path(path_type=Path), default=None,
              help="Required with --bank.")
@click.pass_context
def cmd_report(ctx, inputs, bank_dir, annotation_path):
    """Render evaluation JSON, or bank self-consistency, as an aligned table."""
    rows = []
    if bank_dir is not None:
        if annotation_path is None:
            raise click.UsageError("--bank needs --annotation")
        a = _load_annotation_checked(annotation_path)
        try:
            bank = load_reference_bank(bank_dir, a)
        except (OSError, ValueError, KeyError, AnnotationParseError) as exc:
            _fail(2, str(exc))
        if bank.n < 2:
            _fail(1, f"bank has {bank.n} member(s); consistency needs at least 2")
        for k, (s, e) in enumerate(zip(bank.summaries, bank.entries)):
            others = [r for j, r in enumerate(bank.summaries) if j != k]
            r = measure_report(s, a, references=others, budget=e.budget)
            rows.append((f"summary_{k:03d}", r))
    else:
        if not inputs:
            raise click.UsageError("give evaluation JSON files, or --bank with --annotation")
        try:
            for path in inputs:
                payload = json.loads(Path(path).read_text(encoding="utf-8"))
                for entry in payload["reports"]:
                    rows.append((entry["label"], report_from_dict(entry)))
        except (OSError, ValueError, KeyError) as exc:
            _fail(2, f"bad evaluation file: {exc}")
    click.echo(format_report_table(rows))


if __name__ == "__main__":
    main()
