"""Command-line entry point: ``mgan <subcommand>``.

Run configs are flat ``key = value`` text files (``#`` starts a comment).
Relative paths resolve against the config file's directory. ``--set key=value``
overrides a file value and ``--seed`` overrides ``seed``; the merged config is
written to ``<out_dir>/<command>.config`` next to the command's outputs.

Keys::

    seed, out_dir, min_count
    data.source, data.source_manifest, data.source_test, data.source_test_manifest,
    data.target, data.target_test, data.embeddings
    hp.<field>      any Hyperparams field (defaults are the published values)
    train.<field>   any TrainConfig field except seed
    synth.<field>   any SynthConfig field except source_lexicons

Results go to stdout as ``key=value`` lines. Exit codes: 2 missing file,
3 config violation, 4 gradient check failure, 1 any other input error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields
from pathlib import Path

from .config import Hyperparams
from .corpus import (
    CorpusError,
    EmbeddingConfigError,
    SynthConfig,
    SynthConfigError,
    atomic_write_text,
    build_vocab,
    gen_synthetic,
    load_corpus,
    load_embeddings,
    load_manifest,
)
from .evaluation import EvaluationDomainError, c2f_localization, evaluate, extract_trace
from .gradsuite import TOLERANCE, end_to_end_gradcheck, module_gradchecks
from .numerics import Rng
from .training import (
    CheckpointError,
    ConfigError,
    TrainConfig,
    alternating_train,
    load_checkpoint,
    pretrain_source,
    save_checkpoint,
    train_target_only,
)

EXIT_INPUT, EXIT_MISSING, EXIT_CONFIG, EXIT_GRADCHECK = 1, 2, 3, 4

DATA_KEYS = ("source", "source_manifest", "source_test", "source_test_manifest",
             "target", "target_test", "embeddings")
SECTIONS = {
    "hp": Hyperparams,
    "train": TrainConfig,
    "synth": SynthConfig,
}
EXCLUDED = {"train.seed", "synth.source_lexicons"}


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def missing(path) -> CliError:
    return CliError(EXIT_MISSING, f"missing file: {path}")


def violation(key: str, why: str) -> CliError:
    return CliError(EXIT_CONFIG, f"config key {key}: {why}")


# -- configuration ----------------------------------------------------------------
def _defaults() -> dict[str, object]:
    out: dict[str, object] = {"seed": 0, "out_dir": ".", "min_count": 1}
    out.update({f"data.{k}": None for k in DATA_KEYS})
    for section, cls in SECTIONS.items():
        inst = cls()
        for f in fields(cls):
            key = f"{section}.{f.name}"
            if key not in EXCLUDED:
                out[key] = getattr(inst, f.name)
    return out


DEFAULTS = _defaults()


def _coerce(key: str, raw: str, default):
    raw = raw.strip()
    if key.startswith("data.") or key == "out_dir":
        return raw or None
    try:
        if isinstance(default, bool):
            if raw.lower() not in ("true", "false", "1", "0"):
                raise ValueError
            return raw.lower() in ("true", "1")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float) or default is None:
            return None if raw.lower() == "none" else float(raw)
    except ValueError:
        raise violation(key, f"cannot parse {raw!r} as {type(default).__name__}") from None
    return raw


def parse_pairs(lines, origin: str) -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(lines, start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise CliError(EXIT_CONFIG, f"{origin}: line {lineno} is not key = value")
        key, value = text.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def load_config(path: str | None, overrides=(), seed: int | None = None) -> dict:
    """Defaults, then the file, then --set overrides, then --seed."""
    raw: dict[str, str] = {}
    base = Path.cwd()
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise missing(p)
        raw.update(parse_pairs(p.read_text(encoding="utf-8").splitlines(), str(p)))
        base = p.resolve().parent
    raw.update(parse_pairs(overrides, "--set"))
    cfg = dict(DEFAULTS)
    for key, value in raw.items():
        if key not in DEFAULTS:
            raise violation(key, "unknown key")
        cfg[key] = _coerce(key, value, DEFAULTS[key])
    if seed is not None:
        cfg["seed"] = seed
    for key in [k for k in cfg if k.startswith("data.")] + ["out_dir"]:
        if cfg[key] is not None and not Path(cfg[key]).is_absolute():
            cfg[key] = str(base / cfg[key])
    _validate(cfg)
    return cfg


def _validate(cfg: dict) -> None:
    positive = ["min_count", "hp.d_w", "hp.d_h", "hp.d_u", "hp.fc", "hp.batch_source",
                "hp.batch_target", "train.max_epochs", "train.max_iterations"]
    for key in positive:
        if cfg[key] < 1:
            raise violation(key, "must be >= 1")
    for key in ("hp.lr", "hp.clip_norm", "hp.margin", "hp.init_scale"):
        if not cfg[key] > 0:
            raise violation(key, "must be > 0")
    for key in ("hp.lam", "hp.rho", "train.patience", "train.eval_every"):
        if cfg[key] < 0:
            raise violation(key, "must be >= 0")
    for key in ("hp.dropout", "train.val_fraction"):
        if not 0 <= cfg[key] < 1:
            raise violation(key, "must lie in [0, 1)")


def section(cfg: dict, name: str, **extra):
    cls = SECTIONS[name]
    kwargs = {k.split(".", 1)[1]: v for k, v in cfg.items() if k.startswith(name + ".")}
    return cls(**kwargs, **extra)


def dump_config(cfg: dict) -> str:
    def fmt(v):
        return "none" if v is None else str(v).lower() if isinstance(v, bool) else str(v)
    return "".join(f"{k} = {fmt(v)}\n" for k, v in sorted(cfg.items()))


def require(cfg: dict, key: str) -> Path:
    if cfg[key] is None:
        raise violation(key, "required by this command")
    p = Path(cfg[key])
    if not p.is_file():
        raise missing(p)
    return p


def _optional(cfg: dict, key: str) -> Path | None:
    return require(cfg, key) if cfg[key] is not None else None


def _out_dir(cfg: dict) -> Path:
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def emit(**pairs) -> None:
    for k, v in pairs.items():
        print(f"{k}={format(v, '.6f') if isinstance(v, float) else v}")


def _embeddings(cfg: dict, vocab, hp: Hyperparams):
    path = _optional(cfg, "data.embeddings")
    if path is None:
        return None
    try:
        table, covered = load_embeddings(path, vocab, hp.d_w, Rng(cfg["seed"]).spawn(90))
    except EmbeddingConfigError as e:
        raise violation("hp.d_w", str(e)) from None
    logging.getLogger(__name__).info("embeddings cover %d of %d tokens", covered, len(vocab) - 2)
    return table


def _role(ck, requested: str | None) -> str:
    role = requested or ("target" if "target" in ck.networks else "source")
    if role not in ck.networks:
        raise CliError(EXIT_INPUT, f"checkpoint has no {role} network (has: {', '.join(ck.networks)})")
    return role


# -- commands -------------------------------------------------------------------
def cmd_gen_synth(args) -> int:
    cfg = load_config(args.config, args.set, args.seed)
    try:
        sc = section(cfg, "synth")
        corpus = gen_synthetic(sc, cfg["seed"])
    except SynthConfigError as e:
        raise CliError(EXIT_CONFIG, f"config key synth.*: {e}") from None
    out = _out_dir(cfg)
    paths = corpus.write(out)
    atomic_write_text(out / "gen-synth.config", dump_config(cfg))
    emit(**{k: str(p) for k, p in paths.items()},
         source_examples=len(corpus.source), target_examples=len(corpus.target))
    return 0


def _source_data(cfg):
    source, categories = load_corpus(require(cfg, "data.source"), "source")
    target_path = _optional(cfg, "data.target")
    target = load_corpus(target_path, "target")[0] if target_path else []
    return source, categories, target


def cmd_pretrain(args) -> int:
    cfg = load_config(args.config, args.set, args.seed)
    source, categories, target = _source_data(cfg)
    hp = section(cfg, "hp")
    tc = section(cfg, "train", seed=cfg["seed"])
    # the vocabulary covers both domains so stage 2 can reuse it unchanged
    vocab = build_vocab([source, target], cfg["min_count"])
    emb = _embeddings(cfg, vocab, hp)
    res = pretrain_source(source, vocab, len(categories), hp, tc, embeddings=emb)
    out = _out_dir(cfg)
    save_checkpoint(out / "pretrain.ckpt", {"source": res.network}, vocab, categories, hp,
                    {"source": res.optimizer}, extra={"stage": "pretrain", "seed": cfg["seed"]})
    atomic_write_text(out / "pretrain.log", res.log.to_text())
    atomic_write_text(out / "pretrain.config", dump_config(cfg))
    pairs = dict(checkpoint=str(out / "pretrain.ckpt"), epochs=res.epochs)
    if res.best_val_accuracy is not None:
        pairs["val_accuracy"] = res.best_val_accuracy
    test = _optional(cfg, "data.source_test")
    if test is not None:
        examples = load_corpus(test, "source")[0]
        m = evaluate(res.network, examples, vocab)
        pairs.update(source_test_accuracy=m["accuracy"], source_test_macro_f1=m["macro_f1"])
        manifest = _optional(cfg, "data.source_test_manifest")
        if manifest is not None:
            pairs["localization"] = c2f_localization(res.network, examples, load_manifest(manifest), vocab)
    emit(**pairs)
    return 0


def _target_report(cfg, net, vocab, prefix: str) -> dict:
    test = _optional(cfg, "data.target_test")
    if test is None:
        return {}
    m = evaluate(net, load_corpus(test, "target")[0], vocab)
    return {f"{prefix}test_accuracy": m["accuracy"], f"{prefix}test_macro_f1": m["macro_f1"]}


def cmd_train(args) -> int:
    cfg = load_config(args.config, args.set, args.seed)
    ck_path = Path(args.from_)
    if not ck_path.is_file():
        raise missing(ck_path)
    ck = load_checkpoint(ck_path)
    if "source" not in ck.networks:
        raise CliError(EXIT_INPUT, f"{ck_path}: no source network to start from")
    target = load_corpus(require(cfg, "data.target"), "target")[0]
    source = load_corpus(require(cfg, "data.source"), "source")[0]
    hp = section(cfg, "hp")
    tc = section(cfg, "train", seed=cfg["seed"])
    res = alternating_train(ck.networks["source"], target, source, ck.vocab, hp, tc)
    out = _out_dir(cfg)
    save_checkpoint(out / "train.ckpt", {"source": res.source, "target": res.target}, ck.vocab,
                    ck.categories, hp, {"source": res.source_optimizer, "target": res.target_optimizer},
                    extra={"stage": "train", "seed": cfg["seed"]})
    atomic_write_text(out / "train.log", res.log.to_text())
    atomic_write_text(out / "train.config", dump_config(cfg))
    emit(checkpoint=str(out / "train.ckpt"), iterations=res.iterations, val_accuracy=res.best_val_accuracy,
         **_target_report(cfg, res.target, ck.vocab, ""))
    return 0


def cmd_baseline(args) -> int:
    """Target-only network on the same vocabulary and embeddings as pretrain."""
    cfg = load_config(args.config, args.set, args.seed)
    source, _, target = _source_data(cfg)
    if not target:
        raise violation("data.target", "required by this command")
    hp = section(cfg, "hp")
    tc = section(cfg, "train", seed=cfg["seed"])
    vocab = build_vocab([source, target], cfg["min_count"])
    res = train_target_only(target, vocab, hp, tc, embeddings=_embeddings(cfg, vocab, hp))
    out = _out_dir(cfg)
    save_checkpoint(out / "baseline.ckpt", {"target": res.network}, vocab, [], hp,
                    {"target": res.optimizer}, extra={"stage": "baseline", "seed": cfg["seed"]})
    atomic_write_text(out / "baseline.log", res.log.to_text())
    atomic_write_text(out / "baseline.config", dump_config(cfg))
    pairs = dict(checkpoint=str(out / "baseline.ckpt"), epochs=res.epochs)
    if res.best_val_accuracy is not None:
        pairs["val_accuracy"] = res.best_val_accuracy
    emit(**pairs, **_target_report(cfg, res.network, vocab, ""))
    return 0


def _load_for_eval(args):
    for p in (args.checkpoint, args.corpus):
        if not Path(p).is_file():
            raise missing(p)
    ck = load_checkpoint(args.checkpoint)
    role = _role(ck, args.role)
    examples = load_corpus(args.corpus, role)[0]
    return ck, role, examples


def cmd_eval(args) -> int:
    ck, role, examples = _load_for_eval(args)
    net = ck.networks[role]
    m = evaluate(net, examples, ck.vocab)
    pairs = dict(role=role, n=int(m["n"]), accuracy=m["accuracy"], macro_f1=m["macro_f1"])
    if args.manifest is not None:
        if not Path(args.manifest).is_file():
            raise missing(args.manifest)
        if role != "source":
            raise CliError(EXIT_INPUT, "--manifest applies to source corpora only")
        pairs["localization"] = c2f_localization(net, examples, load_manifest(args.manifest), ck.vocab)
    emit(**pairs)
    return 0


def cmd_attn_dump(args) -> int:
    ck, role, examples = _load_for_eval(args)
    net = ck.networks[role]
    text = "".join(extract_trace(net, ex, ck.vocab).to_json() + "\n" for ex in examples)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out, text)
    emit(role=role, records=len(examples), out=str(out))
    return 0


def cmd_gradcheck(args) -> int:
    seed = args.seed if args.seed is not None else 0
    reports = end_to_end_gradcheck(seed=seed)
    if args.full:
        reports.update(module_gradchecks(seed=seed))
    worst_name, worst = None, -1.0
    for name, r in reports.items():
        emit(suite=name, max_rel_error=f"{r.max_rel_error:.3e}", worst_param=r.worst_param,
             checked=r.n_checked, skipped=r.n_skipped)
        if r.max_rel_error > worst:
            worst_name, worst = name, r.max_rel_error
    if worst >= TOLERANCE:
        r = reports[worst_name]
        print(f"gradcheck failed: {worst_name} parameter {r.worst_param} index {r.worst_index} "
              f"relative error {worst:.3e} >= {TOLERANCE:g}", file=sys.stderr)
        return EXIT_GRADCHECK
    emit(status="ok", max_rel_error=f"{worst:.3e}")
    return 0


# -- argument parsing ------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    common.add_argument("-v", "--verbose", action="store_true", help="log training progress to stderr")
    configured = argparse.ArgumentParser(add_help=False)
    configured.add_argument("--config", help="key = value run config")
    configured.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                            help="override one config key (repeatable)")

    parser = argparse.ArgumentParser(prog="mgan", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synth", parents=[common, configured], help="write a synthetic corpus")
    p.set_defaults(func=cmd_gen_synth)
    p = sub.add_parser("pretrain", parents=[common, configured], help="stage 1: source network")
    p.set_defaults(func=cmd_pretrain)
    p = sub.add_parser("train", parents=[common, configured], help="stage 2: alternating training")
    p.add_argument("--from", dest="from_", required=True, metavar="CHECKPOINT")
    p.set_defaults(func=cmd_train)
    p = sub.add_parser("baseline", parents=[common, configured], help="target-only network")
    p.set_defaults(func=cmd_baseline)

    for name, func, helptext in (("eval", cmd_eval, "accuracy and macro-F1 of a checkpoint"),
                                 ("attn-dump", cmd_attn_dump, "attention traces as JSON lines")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--checkpoint", required=True)
        p.add_argument("--corpus", required=True)
        p.add_argument("--role", choices=("source", "target"))
        if name == "eval":
            p.add_argument("--manifest", help="term positions, for C2F localization")
        else:
            p.add_argument("--out", required=True)
        p.set_defaults(func=func)

    p = sub.add_parser("gradcheck", parents=[common], help="finite-difference gradient suites")
    p.add_argument("--full", action="store_true", help="also run the module-level suites")
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    except FileNotFoundError as e:
        print(f"error: missing file: {e.filename}", file=sys.stderr)
        return EXIT_MISSING
    except ConfigError as e:
        print(f"error: config violation: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (CorpusError, CheckpointError, EvaluationDomainError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
