"""Command-line entry points for every offline experiment and the service.

Each subcommand is reproducible from config plus seed: when no artifact
paths are given, the corpus is regenerated and models retrained in
process from those two inputs alone. Paths let separate invocations share
artifacts instead.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import confidence, gloss, hitl, selective
from .config import load_config
from .errors import DidYouMeanError
from .dsl import (
    NoiseSpec,
    default_grammar,
    generate_corpus,
    load_grammar,
    read_corpus,
    write_corpus,
)
from .model import SequenceModel, decode_corpus, train
from .selective import Policy, UserModel

__all__ = ["main"]


def common_options(f):
    f = click.option(
        "--config",
        "config_path",
        type=click.Path(exists=True, dir_okay=False),
        default=None,
        help="TOML or JSON config file; merged over built-in defaults.",
    )(f)
    f = click.option(
        "--seed", type=int, default=None, help="Override the config seed."
    )(f)
    return f


def _load(config_path, seed) -> dict:
    cfg = load_config(config_path)
    if seed is not None:
        cfg["seed"] = seed
    return cfg


def _grammar(path):
    return load_grammar(path) if path else default_grammar()


def _corpus(cfg, grammar, corpus_path):
    if corpus_path:
        return read_corpus(corpus_path, grammar)
    section = cfg["corpus"]
    noise = {
        split: NoiseSpec(**rates) for split, rates in section["noise"].items()
    }
    return generate_corpus(
        grammar,
        cfg["seed"],
        sizes=section["sizes"],
        context_rate=section["context_rate"],
        noise=noise,
    )


def _model(cfg, corpus, direction, path):
    if path:
        return SequenceModel.load(path)
    return train(corpus.split("train"), direction=direction, **cfg["model"])


def _slice(examples, limit):
    return examples if not limit else examples[:limit]


def _echo_json(payload) -> None:
    click.echo(json.dumps(payload))


grammar_option = click.option(
    "--grammar",
    "grammar_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="Grammar config file; omit for the built-in calendar grammar.",
)
corpus_option = click.option(
    "--corpus",
    "corpus_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="Corpus JSONL; omit to regenerate from config + seed.",
)
parse_model_option = click.option(
    "--parse-model",
    "parse_model_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="Saved parse model; omit to train from the corpus.",
)
gloss_model_option = click.option(
    "--gloss-model",
    "gloss_model_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="Saved gloss model; omit to train from the corpus.",
)
split_option = click.option(
    "--split", default=None, help="Corpus split to evaluate on."
)
limit_option = click.option(
    "--limit", type=int, default=0, help="Use only the first N examples."
)


class _Group(click.Group):
    """Click group that renders domain errors as code: message lines."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except DidYouMeanError as err:
            raise click.ClickException(f"{err.code}: {err}") from err


@click.group(cls=_Group)
@click.version_option(package_name="didyoumean")
def main():
    """Calibrated-confidence toolkit for task-oriented semantic parsing."""


@main.command("gen-corpus")
@common_options
@grammar_option
@click.option(
    "--out",
    type=click.Path(dir_okay=False, writable=True),
    default="corpus.jsonl",
    show_default=True,
)
def gen_corpus(config_path, seed, grammar_path, out):
    """Generate the synthetic calendar corpus as JSONL."""
    cfg = _load(config_path, seed)
    grammar = _grammar(grammar_path)
    corpus = _corpus(cfg, grammar, None)
    write_corpus(corpus, out)
    counts = {s: len(corpus.split(s)) for s in ("train", "validation", "test")}
    _echo_json({"out": out, "seed": cfg["seed"], "sizes": counts})


@main.command("train")
@common_options
@grammar_option
@corpus_option
@click.option(
    "--direction",
    type=click.Choice(["parse", "gloss", "both"]),
    default="both",
    show_default=True,
)
@click.option(
    "--out-dir",
    type=click.Path(file_okay=False),
    default=".",
    show_default=True,
)
def train_cmd(config_path, seed, grammar_path, corpus_path, direction, out_dir):
    """Train count-based models and save them with a version tag."""
    cfg = _load(config_path, seed)
    grammar = _grammar(grammar_path)
    corpus = _corpus(cfg, grammar, corpus_path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = {}
    wanted = ("parse", "gloss") if direction == "both" else (direction,)
    for d in wanted:
        model = train(corpus.split("train"), direction=d, **cfg["model"])
        path = out_dir / f"{d}_model.json"
        model.save(path)
        written[d] = str(path)
    _echo_json({"models": written, "seed": cfg["seed"]})


@main.command("hitl-sweep")
@common_options
@grammar_option
@corpus_option
@parse_model_option
@split_option
@limit_option
@click.option(
    "--out",
    type=click.Path(dir_okay=False, writable=True),
    default=None,
    help="Write one JSON report per threshold to this file.",
)
def hitl_sweep(
    config_path, seed, grammar_path, corpus_path, parse_model_path,
    split, limit, out,
):
    """Sweep query thresholds with a simulated annotator in the loop."""
    cfg = _load(config_path, seed)
    grammar = _grammar(grammar_path)
    corpus = _corpus(cfg, grammar, corpus_path)
    model = _model(cfg, corpus, "parse", parse_model_path)
    examples = _slice(corpus.split(split or cfg["hitl"]["split"]), limit)
    reports = hitl.sweep_thresholds(model, examples, cfg["hitl"]["thresholds"])
    lines = [json.dumps(r.to_dict()) for r in reports]
    if out:
        Path(out).write_text("\n".join(lines) + "\n")
    click.echo(f"{'threshold':>9}  {'accuracy':>8}  {'queried':>8}  {'top5':>8}")
    for r in reports:
        top5 = "-" if r.no_queries else f"{r.top5_rate:8.3f}"
        click.echo(
            f"{r.threshold:9.2f}  {r.accuracy:8.3f}  {r.query_rate:8.3f}  {top5:>8}"
        )
    if out:
        click.echo(f"reports written to {out}")


@main.command("tune-threshold")
@common_options
@grammar_option
@corpus_option
@parse_model_option
@split_option
@limit_option
@click.option(
    "--out",
    type=click.Path(dir_okay=False, writable=True),
    default=None,
    help="Write the full threshold curve as JSON lines.",
)
def tune_threshold_cmd(
    config_path, seed, grammar_path, corpus_path, parse_model_path,
    split, limit, out,
):
    """Pick the F1-optimal execution threshold on validation decodes."""
    cfg = _load(config_path, seed)
    grammar = _grammar(grammar_path)
    corpus = _corpus(cfg, grammar, corpus_path)
    model = _model(cfg, corpus, "parse", parse_model_path)
    examples = _slice(corpus.split(split or "validation"), limit)
    pairs = []
    for record in decode_corpus(model, examples):
        conf = (
            confidence.sequence_confidence(record.decode)
            if record.decode.token_confidences
            else 0.0
        )
        correct = record.terminated and record.tokens == record.gold_tokens
        pairs.append((conf, correct))
    result = selective.tune_threshold(pairs)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            for point in result.curve:
                fh.write(json.dumps(point.to_dict()) + "\n")
    _echo_json({"threshold": result.threshold, "f1": result.score})


@main.command("run-policy")
@common_options
@grammar_option
@corpus_option
@parse_model_option
@gloss_model_option
@split_option
@limit_option
@click.option(
    "--policy",
    "policy_kind",
    type=click.Choice(["accept_all", "threshold", "didyoumean"]),
    default="didyoumean",
    show_default=True,
)
@click.option("--tau", type=float, default=None, help="Execution threshold.")
@click.option(
    "--mode", type=click.Choice(["chosen", "reparsed"]), default=None
)
@click.option(
    "--user",
    "user_kind",
    type=click.Choice(["oracle", "noisy", "scripted"]),
    default=None,
)
@click.option("--epsilon", type=float, default=None, help="Noisy flip rate.")
@click.option(
    "--script",
    "script_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="JSON map of example id to accept flag for the scripted user.",
)
@click.option(
    "--out",
    type=click.Path(dir_okay=False, writable=True),
    default=None,
    help="Write DecisionRecords as JSONL.",
)
def run_policy_cmd(
    config_path, seed, grammar_path, corpus_path, parse_model_path,
    gloss_model_path, split, limit, policy_kind, tau, mode, user_kind,
    epsilon, script_path, out,
):
    """Run one selective-execution policy and print its report."""
    cfg = _load(config_path, seed)
    section = cfg["selective"]
    grammar = _grammar(grammar_path)
    corpus = _corpus(cfg, grammar, corpus_path)
    model = _model(cfg, corpus, "parse", parse_model_path)
    examples = _slice(corpus.split(split or section["split"]), limit)

    tau = section["tau"] if tau is None else tau
    mode = mode or section["mode"]
    user_kind = user_kind or section["user"]
    epsilon = section["epsilon"] if epsilon is None else epsilon
    gloss_model = None
    if policy_kind == "accept_all":
        policy = Policy.accept_all()
    elif policy_kind == "threshold":
        policy = Policy.threshold(tau)
    else:
        script = None
        if script_path:
            script = json.loads(Path(script_path).read_text())
        user = UserModel(
            kind=user_kind, epsilon=epsilon, seed=cfg["seed"], script=script
        )
        policy = Policy.didyoumean(tau, mode=mode, user=user)
        gloss_model = _model(cfg, corpus, "gloss", gloss_model_path)

    records = selective.run_policy(
        policy, examples, model, gloss_model, beam=cfg["gloss"]["beam"]
    )
    if out:
        selective.write_decision_records(out, records)
    _echo_json(selective.evaluate(records).to_dict())


@main.command("gloss-eval")
@common_options
@grammar_option
@corpus_option
@parse_model_option
@gloss_model_option
@split_option
@limit_option
@click.option(
    "--audit",
    "audit_path",
    type=click.Path(dir_okay=False, writable=True),
    default=None,
    help="Write per-example gloss candidates as JSONL.",
)
def gloss_eval(
    config_path, seed, grammar_path, corpus_path, parse_model_path,
    gloss_model_path, split, limit, audit_path,
):
    """Score the gloss model by cycle consistency over gold programs."""
    cfg = _load(config_path, seed)
    grammar = _grammar(grammar_path)
    corpus = _corpus(cfg, grammar, corpus_path)
    parse_model = _model(cfg, corpus, "parse", parse_model_path)
    gloss_model = _model(cfg, corpus, "gloss", gloss_model_path)
    examples = _slice(corpus.split(split or cfg["gloss"]["split"]), limit)
    beam = cfg["gloss"]["beam"]
    report = gloss.cycle_consistency_eval(gloss_model, parse_model, examples, beam)
    if audit_path:
        entries = []
        for ex in examples:
            context = (ex.context_user, ex.context_agent)
            choice = gloss.best_gloss(
                gloss_model, parse_model, context, ex.gold, beam
            )
            entries.append((ex.id, choice))
        gloss.write_gloss_audit(audit_path, entries)
    _echo_json({"cycle_accuracy": report.accuracy, "n": len(report.outcomes)})


@main.command("calibration")
@common_options
@grammar_option
@corpus_option
@parse_model_option
@split_option
@limit_option
@click.option("--n-bins", type=int, default=None)
def calibration_cmd(
    config_path, seed, grammar_path, corpus_path, parse_model_path,
    split, limit, n_bins,
):
    """Reliability table and expected calibration error for one split."""
    cfg = _load(config_path, seed)
    grammar = _grammar(grammar_path)
    corpus = _corpus(cfg, grammar, corpus_path)
    model = _model(cfg, corpus, "parse", parse_model_path)
    examples = _slice(
        corpus.split(split or cfg["calibration"]["split"]), limit
    )
    pairs = []
    for record in decode_corpus(model, examples):
        conf = (
            confidence.sequence_confidence(record.decode)
            if record.decode.token_confidences
            else 0.0
        )
        correct = record.terminated and record.tokens == record.gold_tokens
        pairs.append((conf, correct))
    report = confidence.reliability(
        pairs, n_bins or cfg["calibration"]["n_bins"]
    )
    click.echo(report.table())
    _echo_json(report.to_dict())


@main.command("sample-study")
@common_options
@grammar_option
@corpus_option
@parse_model_option
@split_option
@click.option("--n-bins", type=int, default=None)
@click.option("--per-bin", type=int, default=None)
@click.option("--max-conf", type=float, default=None)
@click.option(
    "--out",
    type=click.Path(dir_okay=False, writable=True),
    default=None,
    help="Write the sampled ids one per line.",
)
def sample_study(
    config_path, seed, grammar_path, corpus_path, parse_model_path,
    split, n_bins, per_bin, max_conf, out,
):
    """Draw a confidence-stratified batch of low-confidence predictions."""
    cfg = _load(config_path, seed)
    section = cfg["sample_study"]
    grammar = _grammar(grammar_path)
    corpus = _corpus(cfg, grammar, corpus_path)
    model = _model(cfg, corpus, "parse", parse_model_path)
    examples = corpus.split(split or section["split"])
    items = []
    for record in decode_corpus(model, examples):
        if not record.decode.token_confidences:
            continue
        items.append((record.id, confidence.sequence_confidence(record.decode)))
    ids = confidence.stratified_sample(
        items,
        n_bins=n_bins or section["n_bins"],
        per_bin=per_bin or section["per_bin"],
        max_conf=max_conf or section["max_conf"],
        seed=cfg["seed"],
    )
    if out:
        Path(out).write_text("\n".join(ids) + "\n")
    _echo_json({"ids": ids, "n": len(ids)})


def _build_state(cfg, grammar_path, corpus_path, parse_model_path, gloss_model_path):
    from .service import ServiceState

    grammar = _grammar(grammar_path)
    corpus = _corpus(cfg, grammar, corpus_path)
    parse_model = _model(cfg, corpus, "parse", parse_model_path)
    gloss_model = _model(cfg, corpus, "gloss", gloss_model_path)
    log_dir = cfg["service"]["log_dir"] or None
    return ServiceState(
        grammar, corpus, parse_model, gloss_model,
        seed=cfg["seed"], log_dir=log_dir,
    )


@main.command("serve")
@common_options
@grammar_option
@corpus_option
@parse_model_option
@gloss_model_option
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
def serve(
    config_path, seed, grammar_path, corpus_path, parse_model_path,
    gloss_model_path, host, port,
):
    """Run the interaction service over HTTP."""
    import uvicorn

    from .service import build_app

    cfg = _load(config_path, seed)
    state = _build_state(
        cfg, grammar_path, corpus_path, parse_model_path, gloss_model_path
    )
    app = build_app(state)
    uvicorn.run(
        app,
        host=host or cfg["service"]["host"],
        port=port or cfg["service"]["port"],
    )


@main.command("simulate-users")
@common_options
@grammar_option
@corpus_option
@parse_model_option
@gloss_model_option
@split_option
@limit_option
@click.option(
    "--url",
    default=None,
    help="Base URL of a running service; omit to drive one in process.",
)
@click.option(
    "--mode",
    type=click.Choice(["confirm-chosen", "confirm-reparsed", "select"]),
    default=None,
)
@click.option("--tau", type=float, default=None)
@click.option("--quorum", type=int, default=None)
@click.option(
    "--user",
    "user_kind",
    type=click.Choice(["oracle", "noisy", "scripted"]),
    default="oracle",
    show_default=True,
)
@click.option("--epsilon", type=float, default=0.0, show_default=True)
@click.option(
    "--script",
    "script_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
)
@click.option(
    "--out",
    type=click.Path(dir_okay=False, writable=True),
    default=None,
    help="Write the exported DecisionRecords as JSONL.",
)
def simulate_users(
    config_path, seed, grammar_path, corpus_path, parse_model_path,
    gloss_model_path, split, limit, url, mode, tau, quorum, user_kind,
    epsilon, script_path, out,
):
    """Drive a service session with a scripted or noisy user model."""
    import httpx

    from .simulate import client_for_app, run_simulation

    cfg = _load(config_path, seed)
    section = cfg["session"]
    if url:
        client = httpx.Client(base_url=url)
    else:
        from .service import build_app

        state = _build_state(
            cfg, grammar_path, corpus_path, parse_model_path, gloss_model_path
        )
        client = client_for_app(build_app(state))

    script = None
    if script_path:
        script = json.loads(Path(script_path).read_text())
    user = UserModel(
        kind=user_kind, epsilon=epsilon, seed=cfg["seed"], script=script
    )
    trace = run_simulation(
        client,
        mode or section["mode"],
        section["tau"] if tau is None else tau,
        user,
        split=split or "test",
        limit=limit or None,
        quorum=quorum or section["quorum"],
        seed=cfg["seed"],
    )
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            for record in trace["records"]:
                fh.write(json.dumps(record) + "\n")
    _echo_json({"session": trace["session"], "report": trace["report"]})


if __name__ == "__main__":
    main(prog_name="didyoumean")
