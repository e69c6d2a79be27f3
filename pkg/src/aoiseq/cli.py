"""
Command-line entry point.

Every command that writes files also writes a run manifest next to them
(``run.json`` inside an output directory, ``<file>.run.json`` beside an
output file) holding the resolved parameters, so ``aoiseq rerun`` can
reproduce the outputs byte for byte.

Exit codes: 0 success, 1 some folds or sequences failed and were recorded,
2 usage, validation or IO errors.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from pathlib import Path

import click
import numpy as np

from . import FORMAT_VERSIONS, __version__
from .crf import CrfModel, classify_crf, train_crf
from .errors import AoiseqError
from .evaluation import (
    FAILED,
    CrfParams,
    HmmParams,
    PipelineConfig,
    format_omega,
    omega_sweep,
    run_loocv,
    sweep_csv,
)
from .geometry import InterfaceLayout, Trajectory, compute_attraction_stats
from .hmm import HmmModel, classify_hmm, train_class_models
from .synthetic import GeneratorConfig, builtin_layout, builtin_scripts, generate_dataset, load_dataset, save_dataset
from .vectorize import VectorizerParams, read_sequences, vectorize_classical, vectorize_possibilistic, write_sequences

log = logging.getLogger("aoiseq")

RUN_MANIFEST = "run.json"


class InputError(click.ClickException):
    """Invalid input files or parameters; exits with status 2."""

    exit_code = 2


class _Fail:
    """Turns library and IO errors into exit status 2."""

    def __enter__(self):
        return self

    def __exit__(self, kind, exc, tb):
        if isinstance(exc, (AoiseqError, OSError)):
            raise InputError(str(exc)) from exc
        return False


def _version_message():
    formats = ", ".join(f"{k} {v}" for k, v in FORMAT_VERSIONS.items())
    return f"aoiseq {__version__} (formats: {formats})"


def _load_config(path) -> dict:
    """Per-command default maps from a JSON config file.

    Top-level scalar keys apply to every command; object-valued keys name a
    command and override the shared values for it.
    """
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise InputError(f"config {path} must hold a JSON object")

    def norm(d):
        return {k.replace("-", "_"): v for k, v in d.items()}

    shared = norm({k: v for k, v in raw.items() if not isinstance(v, dict)})
    sections = {k: norm(v) for k, v in raw.items() if isinstance(v, dict)}
    return {name: {**shared, **sections.get(name, {})} for name in [*COMMANDS, *sections]}


def _manifest_path(out: Path) -> Path:
    return out / RUN_MANIFEST if out.is_dir() else out.with_name(out.name + ".run.json")


def _write_manifest(ctx: click.Context, out: Path, inputs: dict, outputs: list):
    def plain(v):
        if isinstance(v, (list, tuple)):
            return [plain(x) for x in v]
        return str(v) if isinstance(v, Path) else v

    params = {k: plain(v) for k, v in ctx.params.items()}
    manifest = {
        "version": FORMAT_VERSIONS["run-manifest"],
        "tool": "aoiseq",
        "tool_version": __version__,
        "command": ctx.command.name,
        "seed": params.get("seed"),
        "params": params,
        "inputs": {k: str(v) for k, v in inputs.items()},
        "outputs": [str(p) for p in outputs],
    }
    _manifest_path(out).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _read_dataset(dataset: Path, layout_path: Path | None):
    if layout_path is None:
        layout_path = dataset / "layout.json"
        if not layout_path.exists():
            raise InputError(f"{dataset}: no layout.json; pass --layout")
    with _Fail():
        layout = InterfaceLayout.load(layout_path)
        data = load_dataset(dataset)
    return data.trajectories, layout, layout_path


def parse_omegas(text: str) -> list[float]:
    """``start:stop:step`` (stop included) or a comma-separated list."""
    text = str(text).strip()
    if ":" in text:
        try:
            start, stop, step = (float(v) for v in text.split(":"))
        except ValueError:
            raise click.BadParameter(f"expected start:stop:step, got {text!r}") from None
        if step <= 0 or stop < start:
            raise click.BadParameter(f"empty omega range {text!r}")
        n = int(np.floor((stop - start) / step + 1e-9)) + 1
        values = [round(start + k * step, 12) for k in range(n)]
    else:
        try:
            values = [float(v) for v in text.split(",") if v.strip()]
        except ValueError:
            raise click.BadParameter(f"bad omega list {text!r}") from None
    if not values or any(not np.isfinite(v) or v < 0 for v in values):
        raise click.BadParameter("omega values must be finite and >= 0")
    return values


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__, message=_version_message())
@click.option("--config", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="JSON file of option defaults; command-line flags take precedence.")
@click.option("-v", "--verbose", count=True, help="More log output (repeatable).")
@click.pass_context
def main(ctx, config, verbose):
    """Mouse-trajectory task recognition with classical and possibilistic AOI sequences."""
    logging.basicConfig(level=logging.WARNING - 10 * verbose, format="%(levelname)s: %(message)s")
    if config is not None:
        ctx.default_map = _load_config(config)


dataset_arg = click.option("--dataset", required=True, type=click.Path(exists=True, file_okay=False, path_type=Path),
                           help="Dataset directory with manifest.json.")
layout_opt = click.option("--layout", type=click.Path(exists=True, dir_okay=False, path_type=Path),
                          help="Layout JSON (defaults to the dataset's layout.json).")
seed_opt = click.option("--seed", type=int, default=0, show_default=True, help="Master seed.")
jobs_opt = click.option("--jobs", type=click.IntRange(min=1), default=1, show_default=True,
                        help="Parallel fold workers.")


def vectorizer_options(f):
    f = click.option("--ds", type=click.IntRange(min=1), default=1, show_default=True, help="Sampling step in ticks.")(f)
    f = click.option("--threshold", "-P", type=click.FloatRange(0, 1), default=0.5, show_default=True,
                     help="Possibility threshold.")(f)
    f = click.option("--m", "m", type=float, default=2.0, show_default=True, help="Fuzzifier.")(f)
    return f


def classifier_options(f):
    f = click.option("--states", type=click.IntRange(min=1), default=5, show_default=True, help="HMM hidden states.")(f)
    f = click.option("--restarts", type=click.IntRange(min=1), default=3, show_default=True,
                     help="Baum-Welch random restarts.")(f)
    f = click.option("--max-iter", type=click.IntRange(min=1), default=None,
                     help="Iteration cap (default 100 for HMM, 500 for CRF).")(f)
    f = click.option("--tol", type=float, default=None, help="Convergence tolerance (default 1e-4 HMM, 1e-2 CRF).")(f)
    f = click.option("--sigma2", type=float, default=10.0, show_default=True, help="CRF Gaussian prior variance.")(f)
    f = click.option("--model", "classifier", type=click.Choice(["hmm", "crf"]), default="hmm", show_default=True)(f)
    return f


def _pipeline(mode, omega, m, threshold, ds, classifier, states, restarts, max_iter, tol, sigma2, seed):
    with _Fail():
        hmm, crf = HmmParams(), CrfParams()
        hmm = HmmParams(states, restarts, hmm.max_iter if max_iter is None else max_iter, hmm.tol if tol is None else tol)
        crf = CrfParams(sigma2, crf.tol if tol is None else tol, crf.max_iter if max_iter is None else max_iter)
        return PipelineConfig(mode, VectorizerParams(omega, m, threshold, ds), classifier, hmm, crf, seed)


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


@main.command()
@click.option("--out", required=True, type=click.Path(file_okay=False, path_type=Path), help="Output directory.")
@click.option("--seed", type=int, default=2024, show_default=True, help="Master seed.")
@click.option("--per-task", type=click.IntRange(min=1), default=17, show_default=True)
@click.option("--duration-min", type=click.IntRange(min=1), default=300, show_default=True)
@click.option("--duration-max", type=click.IntRange(min=1), default=500, show_default=True)
@click.option("--ds", type=click.IntRange(min=1), default=1, show_default=True)
@click.pass_context
def gen(ctx, out, seed, per_task, duration_min, duration_max, ds):
    """Generate a synthetic labeled dataset."""
    with _Fail():
        cfg = GeneratorConfig(seed, per_task, (duration_min, duration_max), ds)
        layout = builtin_layout()
        data = generate_dataset(cfg, layout, builtin_scripts(layout))
        save_dataset(out, data, layout, seed, cfg.to_dict())
    _write_manifest(ctx, out, {}, [out / "manifest.json", out / "layout.json"])
    click.echo(f"wrote {len(data)} trajectories to {out}")


@main.command()
@click.argument("trajectories", nargs=-1, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--dataset", type=click.Path(exists=True, file_okay=False, path_type=Path),
              help="Dataset directory (instead of trajectory files).")
@layout_opt
@click.option("--mode", type=click.Choice(["classical", "possibilistic"]), default="classical", show_default=True)
@click.option("--omega", type=click.FloatRange(min=0), default=0.0, show_default=True)
@vectorizer_options
@click.option("--out", required=True, type=click.Path(dir_okay=False, path_type=Path), help="Sequence file.")
@click.pass_context
def vectorize(ctx, trajectories, dataset, layout, mode, omega, m, threshold, ds, out):
    """Turn trajectories into observation sequences.

    Attraction statistics for the possibilistic mode come from all the
    trajectories given.
    """
    if bool(trajectories) == bool(dataset):
        raise click.UsageError("give either --dataset or trajectory files")
    if dataset is not None:
        trajs, lay, layout_path = _read_dataset(dataset, layout)
    else:
        if layout is None:
            raise click.UsageError("--layout is required with trajectory files")
        with _Fail():
            lay = InterfaceLayout.load(layout)
            trajs = [Trajectory.load(p) for p in trajectories]
        layout_path = layout
    with _Fail():
        params = VectorizerParams(omega, m, threshold, ds)
        if mode == "classical":
            seqs = [vectorize_classical(t, lay, ds) for t in trajs]
        else:
            stats = compute_attraction_stats(lay, trajs, omega)
            seqs = [vectorize_possibilistic(t, lay, stats, params) for t in trajs]
    for t, s in zip(trajs, seqs):
        if not len(s):
            click.echo(f"warning: {t.id} produced an empty sequence", err=True)
    with _Fail():
        write_sequences(out, seqs)
    _write_manifest(ctx, out, {"layout": layout_path, **({"dataset": dataset} if dataset else {})}, [out])


def _save_bundle(path: Path, kind: str, payload):
    doc = {"version": FORMAT_VERSIONS["classifier-bundle"], "kind": kind}
    if kind == "hmm":
        doc["classes"] = {label: m.to_dict() for label, m in payload.items()}
    else:
        doc["model"] = payload.to_dict()
    path.write_text(json.dumps(doc, indent=2) + "\n")


def load_classifier(path: Path):
    """Read a model bundle written by ``train`` and return ``(kind, predict)``."""
    try:
        doc = json.loads(path.read_text())
        kind = doc["kind"]
        if kind == "hmm":
            models = {label: HmmModel.from_dict(d, path) for label, d in doc["classes"].items()}
            return kind, lambda seq: classify_hmm(models, seq)
        if kind == "crf":
            model = CrfModel.from_dict(doc["model"], path)
            return kind, lambda seq: classify_crf(model, seq)
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise InputError(f"{path}: malformed model bundle: {exc}") from exc
    raise InputError(f"{path}: unknown model kind {kind!r}")


@main.command()
@click.option("--sequences", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@layout_opt
@classifier_options
@seed_opt
@click.option("--out", required=True, type=click.Path(dir_okay=False, path_type=Path), help="Model bundle JSON.")
@click.pass_context
def train(ctx, sequences, layout, classifier, states, restarts, max_iter, tol, sigma2, seed, out):
    """Train class HMMs or one CRF on a labeled sequence file.

    The alphabet is the layout's area names when --layout is given, else the
    symbols present in the training file.
    """
    with _Fail():
        seqs = read_sequences(sequences)
        if any(s.label is None for s in seqs):
            raise InputError(f"{sequences}: every training sequence needs a label")
        alphabet = InterfaceLayout.load(layout).names if layout else sorted({x for s in seqs for x in s})
        cfg = _pipeline("classical", 0.0, 2.0, 0.5, 1, classifier, states, restarts, max_iter, tol, sigma2, seed)
        if classifier == "hmm":
            h = cfg.hmm
            payload = train_class_models(
                seqs, alphabet, h.n_states, seed, max_iter=h.max_iter, tol=h.tol, restarts=h.restarts
            )
        else:
            c = cfg.crf
            payload = train_crf(seqs, c.sigma2, c.tol, c.max_iter, seed, alphabet=alphabet)
        _save_bundle(out, classifier, payload)
    _write_manifest(ctx, out, {"sequences": sequences, **({"layout": layout} if layout else {})}, [out])


@main.command()
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--sequences", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--out", required=True, type=click.Path(dir_okay=False, path_type=Path), help="Predictions CSV.")
@click.pass_context
def classify(ctx, model_path, sequences, out):
    """Classify every sequence of a file; writes ``index,true,predicted``."""
    _, predict = load_classifier(model_path)
    with _Fail():
        seqs = read_sequences(sequences)
    rows, failed = [], 0
    for i, s in enumerate(seqs):
        try:
            label = predict(s)
        except AoiseqError as exc:
            log.warning("sequence %d: %s", i + 1, exc)
            label, failed = FAILED, failed + 1
        rows.append([i + 1, s.label or "", label])
    with _Fail():
        out.write_text(_csv(rows, ["index", "true", "predicted"]))
    _write_manifest(ctx, out, {"model": model_path, "sequences": sequences}, [out])
    if failed:
        ctx.exit(1)


def _prepare_out(out: Path):
    with _Fail():
        out.mkdir(parents=True, exist_ok=True)


@main.command()
@dataset_arg
@layout_opt
@click.option("--mode", type=click.Choice(["classical", "possibilistic"]), default="classical", show_default=True)
@click.option("--omega", type=click.FloatRange(min=0), default=0.0, show_default=True)
@vectorizer_options
@classifier_options
@seed_opt
@jobs_opt
@click.option("--out", required=True, type=click.Path(file_okay=False, path_type=Path), help="Output directory.")
@click.pass_context
def loocv(ctx, dataset, layout, mode, omega, m, threshold, ds, classifier, states, restarts, max_iter, tol, sigma2,
          seed, jobs, out):
    """Leave-one-out accuracy of one pipeline.

    Writes report.csv, confusion.csv and folds.csv.
    """
    trajs, lay, layout_path = _read_dataset(dataset, layout)
    cfg = _pipeline(mode, omega, m, threshold, ds, classifier, states, restarts, max_iter, tol, sigma2, seed)
    with _Fail():
        res = run_loocv(trajs, lay, cfg, jobs=jobs)
    _prepare_out(out)
    folds = _csv([[f.id, f.true, f.predicted or FAILED, f.error or ""] for f in res.folds],
                 ["id", "true", "predicted", "error"])
    outputs = {"report.csv": res.report.to_csv(), "confusion.csv": res.confusion_csv(), "folds.csv": folds}
    for name, text in outputs.items():
        (out / name).write_text(text)
    _write_manifest(ctx, out, {"dataset": dataset, "layout": layout_path}, [out / n for n in outputs])
    click.echo(res.report.to_csv(), nl=False)
    if res.failures:
        click.echo(f"{len(res.failures)} fold(s) failed; see folds.csv", err=True)
        ctx.exit(1)


@main.command()
@dataset_arg
@layout_opt
@click.option("--omegas", default="0:12:1", show_default=True,
              help="start:stop:step (inclusive) or a comma-separated list.")
@vectorizer_options
@classifier_options
@seed_opt
@jobs_opt
@click.option("--out", required=True, type=click.Path(file_okay=False, path_type=Path), help="Output directory.")
@click.pass_context
def sweep(ctx, dataset, layout, omegas, m, threshold, ds, classifier, states, restarts, max_iter, tol, sigma2, seed,
          jobs, out):
    """Possibilistic LOOCV accuracy for each omega; writes sweep.csv."""
    values = parse_omegas(omegas)
    trajs, lay, layout_path = _read_dataset(dataset, layout)
    cfg = _pipeline("possibilistic", 0.0, m, threshold, ds, classifier, states, restarts, max_iter, tol, sigma2, seed)
    with _Fail():
        points = omega_sweep(trajs, lay, cfg, values, jobs=jobs)
    _prepare_out(out)
    (out / "sweep.csv").write_text(sweep_csv(points))
    failures = [(p.omega, f) for p in points for f in p.result.failures]
    if failures:
        (out / "failures.csv").write_text(
            _csv([[format_omega(w), f.id, f.true, f.error] for w, f in failures], ["omega", "id", "true", "error"])
        )
    _write_manifest(ctx, out, {"dataset": dataset, "layout": layout_path}, [out / "sweep.csv"])
    click.echo(sweep_csv(points), nl=False)
    if failures:
        click.echo(f"{len(failures)} fold(s) failed; see failures.csv", err=True)
        ctx.exit(1)


@main.command()
@click.argument("manifest", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--out", type=click.Path(path_type=Path), help="Write outputs here instead of the original location.")
@click.option("--jobs", type=click.IntRange(min=1), help="Override the recorded worker count.")
@click.pass_context
def rerun(ctx, manifest, out, jobs):
    """Repeat the command recorded in a run manifest."""
    try:
        doc = json.loads(manifest.read_text())
        name, params = doc["command"], dict(doc["params"])
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise InputError(f"{manifest}: malformed run manifest: {exc}") from exc
    if name not in COMMANDS or name == "rerun":
        raise InputError(f"{manifest}: cannot rerun command {name!r}")
    if out is not None:
        params["out"] = str(out)
    if jobs is not None and "jobs" in params:
        params["jobs"] = jobs
    cmd = main.commands[name]
    args = []
    for p in cmd.params:
        if p.name not in params or params[p.name] is None:
            continue
        v = params[p.name]
        if isinstance(p, click.Argument):
            args.extend(str(x) for x in v)
        elif p.count:
            args.extend([p.opts[0]] * v)
        elif isinstance(v, bool):
            if v:
                args.append(p.opts[0])
        else:
            args.extend([p.opts[0], str(v)])
    ctx.exit(cmd.main(args, prog_name=f"aoiseq {name}", standalone_mode=False) or 0)


COMMANDS = ("gen", "vectorize", "train", "classify", "loocv", "sweep", "rerun")
