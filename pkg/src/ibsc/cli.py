"""Command-line front end.

Every stage reads its inputs from disk and writes its artifacts into the
output directory, so stages can be rerun one at a time. A one-line JSON
summary per stage goes to stdout; logs go to stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import data
from .config import CLASSIFIERS, PipelineConfig, load_config
from .construction import (
    build_source_plan,
    construct_all,
    pairwise_stats,
    read_constructed,
    write_constructed,
    write_source_plan,
)
from .errors import ConfigError, NumericError, ValidationError
from .evaluation import (
    PipelineArtifacts,
    compare_strategies,
    evaluate_samples,
    EvalReport,
    unseen_test_set,
)
from .relation import (
    environment_dims,
    fit_relation,
    load_models,
    load_relation,
    relation_f1,
    save_models,
    save_relation,
)
from .screening import screen_all
from .synthgen import SynthConfig, generate

log = logging.getLogger("ibsc")

# artifact file names inside the output directory
FEATURES = "features.csv"
ATTR_CONT = "attributes_continuous.csv"
ATTR_BIN = "attributes_binary.csv"
SPLIT = "split.txt"
TRUTH_R = "ground_truth_R.bin"
TRUTH_DEGENERATE = "ground_truth_degenerate.txt"
RELATION_R = "relation_R.bin"
RELATION_DEGENERATE = "relation_degenerate.txt"
MODELS = "attribute_models.json"
PLAN = "source_plan.csv"
CONSTRUCTED = "constructed.csv"
CONSTRUCTED_PROV = "constructed_provenance.csv"
SCREENED = "screened.csv"
SCREENED_PROV = "screened_provenance.csv"
SCORED = "scored.csv"
SCORED_PROV = "scored_provenance.csv"
EVAL_REPORT = "eval_report.json"
COMPARE_REPORT = "compare_report.json"

STAGES = ("synth", "relation", "construct", "screen", "eval", "compare", "pipeline")


class Context:
    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.out = Path(cfg.out)

    def path(self, name: str) -> Path:
        return self.out / name

    def input_path(self, attr: str, default: str) -> Path:
        value = getattr(self.cfg, attr)
        return Path(value) if value else self.path(default)

    def require(self, path: Path) -> Path:
        if not path.exists():
            raise ValidationError(f"missing input file: {path}")
        return path

    def load_inputs(self):
        features = self.require(self.input_path("features", FEATURES))
        cont = self.require(self.input_path("attributes_continuous", ATTR_CONT))
        binary = self.require(self.input_path("attributes_binary", ATTR_BIN))
        split_path = self.require(self.input_path("split", SPLIT))
        attrs = data.load_attribute_table(cont, binary)
        dataset = data.load_dataset(features, self.cfg.features_format, class_names=attrs.class_names)
        split = data.load_split(split_path)
        split.check(dataset, attrs.K)
        return dataset, attrs, split

    def load_relation(self):
        rel = load_relation(self.require(self.path(RELATION_R)), self.path(RELATION_DEGENERATE))
        models = load_models(self.require(self.path(MODELS)))
        return rel, models

    def emit(self, stage: str, **summary):
        summary = {"stage": stage, "seed": self.cfg.seed, **summary}
        print(json.dumps(summary, sort_keys=True), flush=True)


# --- stages ----------------------------------------------------------------

def synth_config(cfg: PipelineConfig) -> SynthConfig:
    types = {f.name: f.type for f in dataclasses.fields(SynthConfig)}
    kwargs = {}
    for key, raw in cfg.synth.items():
        if key not in types:
            raise ConfigError(f"unknown [synth] key {key!r}")
        try:
            kwargs[key] = int(raw) if types[key] == "int" else float(raw)
        except ValueError:
            raise ConfigError(f"[synth] {key}: cannot parse {raw!r}") from None
    kwargs["seed"] = cfg.seed
    return SynthConfig(**kwargs)


def stage_synth(ctx: Context):
    scfg = synth_config(ctx.cfg)
    dataset, attrs, split, truth = generate(scfg)
    data.write_dataset(dataset, ctx.path(FEATURES))
    data.write_attribute_table(attrs, ctx.path(ATTR_CONT), ctx.path(ATTR_BIN))
    data.write_split(split, ctx.path(SPLIT))
    save_relation(truth, ctx.path(TRUTH_R), ctx.path(TRUTH_DEGENERATE))
    ctx.emit("synth", n=dataset.n, p=dataset.p, K=attrs.K, d=attrs.d,
             seen=len(split.seen), unseen=len(split.unseen))


def stage_relation(ctx: Context):
    dataset, attrs, split = ctx.load_inputs()
    rel, models = fit_relation(dataset, attrs, split, lam=ctx.cfg.lam, seed=ctx.cfg.seed,
                               threads=ctx.cfg.worker_count())
    save_relation(rel, ctx.path(RELATION_R), ctx.path(RELATION_DEGENERATE))
    save_models(models, ctx.path(MODELS))
    summary = {
        "relevant_per_attribute": rel.R.sum(axis=1).tolist(),
        "degenerate_rows": sorted(rel.degenerate_rows),
        "environment_dims": int(environment_dims(rel).size),
    }
    truth_path = ctx.path(TRUTH_R)
    if truth_path.exists():
        truth = load_relation(truth_path, ctx.path(TRUTH_DEGENERATE))
        if truth.R.shape == rel.R.shape:
            summary["f1_vs_ground_truth"] = float(relation_f1(rel, truth).mean())
    ctx.emit("relation", **summary)


def stage_construct(ctx: Context):
    dataset, attrs, split = ctx.load_inputs()
    rel, models = ctx.load_relation()
    stats = pairwise_stats(attrs)
    cfg = ctx.cfg
    plan = build_source_plan(attrs, stats, split, k=cfg.k, auto_k=cfg.auto_k, k_max=cfg.k_max)
    samples = construct_all(dataset, attrs, rel, plan, models, split, m=cfg.shortlist)
    write_source_plan(plan, ctx.path(PLAN))
    write_constructed(samples, ctx.path(CONSTRUCTED), ctx.path(CONSTRUCTED_PROV), attrs.class_names)
    skipped = sorted({(s.target_class, a) for s in samples for a in s.skipped_attributes})
    ctx.emit("construct", constructed=len(samples), assignment_cost=plan.assignment_cost,
             primary_sources={str(u): plan.primary(u) for u in sorted(plan.sources)},
             skipped_attributes=[list(t) for t in skipped])


def stage_screen(ctx: Context):
    dataset, attrs, split = ctx.load_inputs()
    samples = read_constructed(ctx.require(ctx.path(CONSTRUCTED)), ctx.require(ctx.path(CONSTRUCTED_PROV)),
                               attrs.class_names)
    centroids = data.class_centroids(dataset, split.seen)
    kept, scored = screen_all(samples, attrs, split, centroids, ctx.cfg.keep_fraction)
    names = attrs.class_names
    write_constructed(kept, ctx.path(SCREENED), ctx.path(SCREENED_PROV), names, with_scores=True)
    write_constructed(scored, ctx.path(SCORED), ctx.path(SCORED_PROV), names, with_scores=True)
    ctx.emit("screen", kept=len(kept), scored=len(scored), keep_fraction=ctx.cfg.keep_fraction)


def _load_sample_sets(ctx: Context, attrs):
    names = attrs.class_names
    constructed = read_constructed(ctx.require(ctx.path(CONSTRUCTED)),
                                   ctx.require(ctx.path(CONSTRUCTED_PROV)), names)
    screened = read_constructed(ctx.require(ctx.path(SCREENED)), ctx.require(ctx.path(SCREENED_PROV)),
                                names, with_scores=True)
    scored = read_constructed(ctx.require(ctx.path(SCORED)), ctx.require(ctx.path(SCORED_PROV)),
                              names, with_scores=True)
    return constructed, screened, scored


def stage_eval(ctx: Context):
    dataset, attrs, split = ctx.load_inputs()
    constructed, screened, _ = _load_sample_sets(ctx, attrs)
    test_X, test_y = unseen_test_set(dataset, split)
    cfg = ctx.cfg
    results = {
        "IBSC": evaluate_samples(constructed, test_X, test_y, split.unseen_sorted, cfg.classifier,
                                 cfg.classifier_lambda),
        "IBSC_S": evaluate_samples(screened, test_X, test_y, split.unseen_sorted, cfg.classifier,
                                   cfg.classifier_lambda),
    }
    report = EvalReport(results, cfg.echo(), cfg.seed)
    ctx.path(EVAL_REPORT).write_text(report.to_json())
    ctx.emit("eval", **{k: v["top1"] for k, v in results.items()})


def stage_compare(ctx: Context):
    dataset, attrs, split = ctx.load_inputs()
    rel, models = ctx.load_relation()
    constructed, screened, scored = _load_sample_sets(ctx, attrs)
    cfg = ctx.cfg
    stats = pairwise_stats(attrs)
    plan = build_source_plan(attrs, stats, split, k=cfg.k, auto_k=cfg.auto_k, k_max=cfg.k_max)
    artifacts = PipelineArtifacts(rel, models, stats, plan, constructed, screened, scored)
    report = compare_strategies(dataset, attrs, split, cfg, cfg.seed, artifacts=artifacts)
    ctx.path(COMPARE_REPORT).write_text(report.to_json())
    ctx.emit("compare", **{k: v["top1"] for k, v in report.strategies.items()})


def stage_pipeline(ctx: Context):
    if ctx.cfg.synth or not ctx.cfg.features:
        stage_synth(ctx)
    for stage in (stage_relation, stage_construct, stage_screen, stage_eval, stage_compare):
        stage(ctx)


HANDLERS = {
    "synth": stage_synth,
    "relation": stage_relation,
    "construct": stage_construct,
    "screen": stage_screen,
    "eval": stage_eval,
    "compare": stage_compare,
    "pipeline": stage_pipeline,
}


# --- entry point -----------------------------------------------------------

class ArgumentError(ConfigError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ArgumentError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="pipeline config file")
    common.add_argument("--seed", type=int, help="overrides the config seed")
    common.add_argument("--threads", type=int, help="worker cap (default: available cores)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--keep-fraction", type=float, dest="keep_fraction")
    common.add_argument("--k", type=int)
    common.add_argument("--classifier", choices=CLASSIFIERS)
    common.add_argument("-v", "--verbose", action="store_true")
    parser = _Parser(prog="ibsc", description=__doc__.splitlines()[0], parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in STAGES:
        sub.add_parser(name, parents=[common])
    return parser


def resolve_config(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    for key in ("seed", "out", "keep_fraction", "k", "classifier", "threads"):
        value = getattr(args, key, None)
        if value is not None:
            setattr(cfg, key, value)
    return cfg.validate()


def _fail(kind: str, message: str, code: int) -> int:
    line = json.dumps({"error": kind, "exit": code, "message": " ".join(str(message).split())})
    print(line, file=sys.stderr, flush=True)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ArgumentError as exc:
        return _fail("ArgumentError", str(exc), 1)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        ctx = Context(cfg)
        ctx.out.mkdir(parents=True, exist_ok=True)
        HANDLERS[args.command](ctx)
    except NumericError as exc:
        return _fail(type(exc).__name__, str(exc), 2)
    except ValidationError as exc:
        return _fail(type(exc).__name__, str(exc), 1)
    except OSError as exc:
        return _fail(type(exc).__name__, str(exc), 1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
