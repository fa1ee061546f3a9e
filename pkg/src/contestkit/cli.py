"""Command-line front door: one binary, five subcommands.

fit-terms   rank a community's insider vocabulary against background dumps
gen-bank    expand and gate reply variants from a seed bank
run         drive a campaign (pilot, automated, or simulated)
analyze     fold an event log into the campaign report
serve       host the review API from a log file, no campaign attached

Exit codes: 0 success, 1 usage error (bad flags, missing files, invalid
config), 2 runtime error. All randomness flows from --seed; unseeded runs
draw a seed and print it so they can be reproduced.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import random
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

import yaml

from .analysis import AnalysisError, campaign_report, render_report_table
from .bank import (
    BankError,
    GatePolicy,
    GeneratorError,
    RemoteGenerator,
    default_bank_path,
    expand_variants,
    load_bank,
    load_variants,
    manual_variant,
    save_bank,
)
from .corpus import (
    Corpus,
    CorpusError,
    CountVector,
    build_vocab,
    count_vector,
    ingest_dump,
    load_stoplist,
    recent_count_vector,
)
from .emotion import EmotionError
from .connectors import LiveConnector, LiveConnectorConfig, PlatformError
from .orchestrator.campaign import Campaign, CampaignError, config_from_file
from .orchestrator.events import CorruptLogError, EventLog, EventLogError, read_event_log
from .orchestrator.review_queue import QueueError
from .orchestrator.scheduler import SchedulerError
from .sage import (
    DEFAULT_ALPHA,
    SageError,
    background_log_probs,
    fit_sage,
    rank_insider_terms,
    read_term_report,
    sweep_lambda,
    write_term_report,
)
from .simulator import SimulatedCommunity, load_scenario

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

log = logging.getLogger(__name__)

_MODULE_ERRORS = (
    AnalysisError,
    BankError,
    CampaignError,
    CorpusError,
    EmotionError,
    EventLogError,
    GeneratorError,
    PlatformError,
    QueueError,
    SageError,
    SchedulerError,
)


class CliError(Exception):
    """Usage-class failure: bad paths, bad values, unusable config."""


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors by default; the contract here is 1
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _lambda_arg(text: str):
    if text == "sweep":
        return "sweep"
    value = float(text)
    if value < 0:
        raise argparse.ArgumentTypeError("lambda must be >= 0 or 'sweep'")
    return value


def data_home() -> Path:
    """Default output directory, overridable via CONTEST_HOME."""
    return Path(os.environ.get("CONTEST_HOME", str(Path.home() / ".contestkit")))


def _require_file(path: str | Path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise CliError(f"no such file: {p}")
    return p


def _resolve_out(explicit: Optional[str], default_name: str) -> Path:
    if explicit:
        out = Path(explicit)
    else:
        out = data_home() / default_name
    out.parent.mkdir(parents=True, exist_ok=True)
    return out


def _module_tag(exc: BaseException) -> str:
    mod = type(exc).__module__
    if mod.startswith("contestkit"):
        return mod.rsplit(".", 1)[-1]
    return mod


# --- fit-terms ------------------------------------------------------------


def _ingest_whole(path: str | Path, community: str) -> Corpus:
    """Read a dump and window the corpus to its own time span."""
    _require_file(path)
    corpus, summary = ingest_dump(path, community, window=(0.0, float("inf")))
    if summary.malformed:
        log.warning("%s: skipped %d malformed lines", path, len(summary.malformed))
    if not corpus.documents:
        raise CliError(f"dump has no usable documents: {path}")
    times = [d.created_at for d in corpus.documents]
    return Corpus(
        community=community,
        documents=corpus.documents,
        window=(min(times), max(times)),
    )


def cmd_fit_terms(args: argparse.Namespace) -> int:
    community = args.community or Path(args.target).stem
    target = _ingest_whole(args.target, community)
    backgrounds = [_ingest_whole(p, Path(p).stem) for p in args.background]

    stops = load_stoplist()
    vocab = build_vocab(
        target,
        backgrounds,
        min_count=args.min_count,
        recency_days=args.recency_days,
        stoplist=stops,
    )
    if len(vocab) == 0:
        raise CliError("no vocabulary terms survive the count and recency filters")
    target_counts = count_vector(target, vocab)
    bg_totals = [0] * len(vocab)
    for bg in backgrounds:
        for i, c in enumerate(count_vector(bg, vocab).counts):
            bg_totals[i] += c
    background_counts = CountVector(vocab_size=len(vocab), counts=bg_totals)
    model = background_log_probs(background_counts, args.alpha)

    if args.lam == "sweep":
        sweep = sweep_lambda(target_counts, model)
        fit = sweep.chosen
        note = " (fallback)" if sweep.fallback else ""
        print(f"lambda: {fit.lam}{note}")
    else:
        fit = fit_sage(target_counts, model, args.lam)
        print(f"lambda: {fit.lam}")

    recent = recent_count_vector(target, vocab, args.recency_days)
    terms = rank_insider_terms(
        fit, vocab, target_counts, background_counts, recent, args.min_recent
    )
    out = _resolve_out(args.out, "term_report.tsv")
    header = {
        "community": community,
        "target": args.target,
        "backgrounds": ",".join(args.background),
        "alpha": args.alpha,
        "lambda": fit.lam,
        "min_count": args.min_count,
        "min_recent": args.min_recent,
        "recency_days": args.recency_days,
    }
    write_term_report(out, terms, header)
    print(f"{len(terms)} insider terms -> {out}")
    for t in terms[: args.top]:
        print(f"{t.eta_score:9.4f} {t.target_count:7d} {t.recent_count:7d}  {t.term}")
    return EXIT_OK


# --- gen-bank ---------------------------------------------------------------


def cmd_gen_bank(args: argparse.Namespace) -> int:
    report_path = _require_file(args.report)
    bank_path = _require_file(args.bank) if args.bank else default_bank_path()
    ranked = read_term_report(report_path)
    rank_of = {t.term: i for i, t in enumerate(ranked)}
    templates = load_bank(bank_path)

    generator = None
    if args.generator == "remote":
        if not args.endpoint:
            raise CliError("--generator remote needs --endpoint")
        generator = RemoteGenerator(args.endpoint)

    policy = GatePolicy()
    variants = []
    covered = 0
    for template in templates:
        in_report = [t for t in template.trigger_terms if t in rank_of]
        if not in_report:
            log.info("template %s: no trigger term in the report, skipped", template.id)
            continue
        covered += 1
        term = min(in_report, key=lambda t: rank_of[t])
        variants.append(manual_variant(template, term=term, policy=policy))
        variants.extend(
            expand_variants(
                template, generator=generator, n=args.expand_n, term=term, policy=policy
            )
        )

    passed = sum(1 for v in variants if v.gate == "passed")
    rejected = [v for v in variants if v.gate != "passed"]
    out = _resolve_out(args.out, "bank_expanded.yaml")
    save_bank(out, templates, variants=variants)
    print(f"templates: {len(templates)} loaded, {covered} covered by the report")
    print(f"variants: {passed} passed, {len(rejected)} rejected -> {out}")
    for v in rejected:
        print(f"  rejected {v.variant_id}: {v.gate_reason}")
    return EXIT_OK


# --- run --------------------------------------------------------------------


def _load_campaign_inputs(args: argparse.Namespace):
    config_path = args.config_path or args.config
    if not config_path:
        raise CliError("run needs a campaign config path (positional or --config)")
    _require_file(config_path)
    try:
        config = config_from_file(config_path, mode_override=args.mode)
        raw = yaml.safe_load(Path(config_path).read_text(encoding="utf-8")) or {}
    except (CampaignError, yaml.YAMLError, KeyError, TypeError, ValueError) as exc:
        raise CliError(f"invalid campaign config {config_path}: {exc}") from exc
    return config, raw


def _campaign_variants(bank_path: Path, policy: GatePolicy):
    templates = load_bank(bank_path)
    stored = load_variants(bank_path)
    if stored:
        return stored
    return [manual_variant(t, policy=policy) for t in templates]


def _resolve_seed(explicit: Optional[int], scripted: int = 0) -> int:
    if explicit is not None:
        return explicit
    if scripted:
        return scripted
    return random.SystemRandom().randrange(1, 2**31)


def cmd_run(args: argparse.Namespace) -> int:
    config, raw = _load_campaign_inputs(args)

    bank_path = Path(args.bank or raw.get("bank") or default_bank_path())
    _require_file(bank_path)
    variants = _campaign_variants(bank_path, config.gate_policy)

    log_path = Path(args.log or raw.get("event_log") or data_home() / "campaign.ndjson")
    log_path.parent.mkdir(parents=True, exist_ok=True)
    if log_path.exists():
        log_path.unlink()  # each run is a fresh campaign; stale logs would corrupt replay

    if config.mode == "simulated":
        scenario_path = args.scenario or raw.get("scenario")
        if scenario_path:
            _require_file(scenario_path)
            scenario = load_scenario(scenario_path)
        else:
            from importlib import resources

            bundled = resources.files("contestkit.data").joinpath("scenario_default.yaml")
            scenario = load_scenario(Path(str(bundled)))
        seed = _resolve_seed(args.seed, scenario.seed)
        scenario.seed = seed
        print(f"seed: {seed}")
        connector = SimulatedCommunity(scenario)
        with EventLog(log_path) as event_log:
            campaign = Campaign(config, connector, variants, event_log=event_log)
            campaign.run_simulated(connector, step_s=args.step_s, max_steps=args.max_steps)
            posted = len(campaign.deployed)
            responses = len(campaign.responses)
        print(f"posted {posted} interventions, collected {responses} responses")
        print(f"event log -> {log_path}")
        return EXIT_OK

    platform_path = raw.get("platform")
    if not platform_path:
        raise CliError(f"mode {config.mode!r} needs a platform connector config ('platform' key)")
    _require_file(platform_path)
    connector = LiveConnector(LiveConnectorConfig.from_file(platform_path))
    seed = _resolve_seed(args.seed)
    print(f"seed: {seed}")
    with EventLog(log_path) as event_log:
        campaign = Campaign(config, connector, variants, event_log=event_log)
        print(f"event log -> {log_path}")
        try:
            while True:
                campaign.tick(time.time())
                time.sleep(connector.config.poll_interval_s)
        except KeyboardInterrupt:
            print("interrupted, closing out")
        finally:
            campaign.finish(time.time())
    return EXIT_OK


# --- analyze ------------------------------------------------------------------


def cmd_analyze(args: argparse.Namespace) -> int:
    _require_file(args.log)
    records = read_event_log(args.log)
    report = campaign_report(records)
    if args.fmt == "structured":
        print(json.dumps(report, indent=2, sort_keys=True))
    else:
        print(render_report_table(report))
    return EXIT_OK


# --- serve ---------------------------------------------------------------------


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .orchestrator.api import ApiStore, create_app
    from .orchestrator.review_queue import ReviewQueue

    if args.log:
        _require_file(args.log)
        store = ApiStore.from_log_file(args.log)
    else:
        store = ApiStore(
            queue=ReviewQueue(),
            log=EventLog(),
            deployed={},
            responses=[],
        )
        print("no --log given; serving an empty store")
    app = create_app(store)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return EXIT_OK


# --- parser --------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(
        prog="contestkit",
        description="insider-term discovery, gated reply banks, and campaign tooling",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="campaign config file")
    common.add_argument("--seed", type=int, help="master random seed")
    common.add_argument("--verbose", action="store_true", help="debug logging")

    sub = parser.add_subparsers(dest="subcommand", metavar="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser(
        "fit-terms",
        parents=[common],
        help="rank insider terms from a target dump against backgrounds",
    )
    p.add_argument("target", help="target community dump")
    p.add_argument(
        "--background",
        action="append",
        default=[],
        required=True,
        metavar="PATH",
        help="background dump, repeatable",
    )
    p.add_argument("--community", help="target community label (dump stem by default)")
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA, help="smoothing pseudocount")
    p.add_argument(
        "--lambda",
        dest="lam",
        type=_lambda_arg,
        default="sweep",
        metavar="VALUE|sweep",
        help="sparsity penalty, or 'sweep' the default grid",
    )
    p.add_argument("--min-recent", type=int, default=1, help="recent-use floor per term")
    p.add_argument("--min-count", type=int, default=2, help="vocabulary count floor")
    p.add_argument("--recency-days", type=int, default=90)
    p.add_argument("--top", type=int, default=30, help="rows to print")
    p.add_argument("--out", help="report path (default under CONTEST_HOME)")
    p.set_defaults(func=cmd_fit_terms)

    p = sub.add_parser(
        "gen-bank", parents=[common], help="expand a seed bank into gated variants"
    )
    p.add_argument("report", help="term report from fit-terms")
    p.add_argument("bank", nargs="?", help="seed bank file (bundled bank by default)")
    p.add_argument("--expand-n", type=_positive_int, default=3, help="variants per template")
    p.add_argument("--generator", choices=("builtin", "remote"), default="builtin")
    p.add_argument("--endpoint", help="remote generator URL")
    p.add_argument("--out", help="output bank path (default under CONTEST_HOME)")
    p.set_defaults(func=cmd_gen_bank)

    p = sub.add_parser("run", parents=[common], help="run a campaign")
    p.add_argument("config_path", nargs="?", metavar="config", help="campaign config file")
    p.add_argument("--mode", choices=("pilot", "automated", "simulated"))
    p.add_argument("--scenario", help="scenario script for simulated mode")
    p.add_argument("--bank", help="bank file with variants")
    p.add_argument("--log", help="event log path (overwritten)")
    p.add_argument("--step-s", type=float, default=60.0, help="simulated clock step")
    p.add_argument("--max-steps", type=_positive_int, default=100_000)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("analyze", parents=[common], help="report over an event log")
    p.add_argument("log", help="event log path")
    p.add_argument(
        "--format",
        dest="fmt",
        choices=("table", "structured"),
        default="table",
    )
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser(
        "serve", parents=[common], help="serve the review API from a log file"
    )
    p.add_argument("--log", help="event log to load")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8008)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except CliError as exc:
        print(f"contestkit: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CorruptLogError as exc:
        print(f"events: corrupt log at sequence {exc.seq}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except _MODULE_ERRORS as exc:
        print(f"{_module_tag(exc)}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
