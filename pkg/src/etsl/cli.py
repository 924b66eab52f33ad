"""``etsl`` command line: synth, stats, preprocess, train, translate, evaluate.

Failures print one line ``error: <Code>: <detail>`` on stderr and exit 1.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import torch

from . import corpus_stats, synth
from .config import RunConfig, build_run_config
from .data import make_examples
from .errors import ConfigError, EtslError, MissingHypothesis
from .landmarks import SPLITS, ManifestEntry, load_manifest, save_clip, write_manifest
from .metrics import evaluate
from .model import VARIANTS, SignTranslator
from .preprocess import normalized_clip
from .training import format_history, load_checkpoint, save_checkpoint, train, translate_examples
from .vocab import Tokenizer, Vocabulary

log = logging.getLogger("etsl")


def _overrides(args: argparse.Namespace) -> dict:
    out = {"variant": getattr(args, "variant", None), "seed": getattr(args, "seed", None)}
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _device(name: str) -> torch.device:
    if name.startswith("cuda") and not torch.cuda.is_available():
        raise ConfigError(f"device {name!r} requested but CUDA is unavailable")
    return torch.device(name)


def _tokenizer_from(args) -> Tokenizer:
    if getattr(args, "config", None):
        return build_run_config(args.config).tokenizer()
    return Tokenizer()


def cmd_synth(args) -> None:
    cfg = synth.SynthConfig(
        seed=args.seed, n_clips=args.n_clips, vocab_size=args.vocab_size,
        min_tokens=args.min_tokens, max_tokens=args.max_tokens,
        frames_per_token=args.frames_per_token, noise_std=args.noise_std,
    )
    manifest = synth.generate(cfg, args.out)
    counts = manifest.counts()
    print(f"wrote {len(manifest)} clips to {args.out} " + " ".join(f"{k}={v}" for k, v in counts.items()))


def cmd_stats(args) -> None:
    manifest = load_manifest(args.manifest)
    entries = manifest.split(args.split) if args.split else list(manifest)
    texts = [e.transcript for e in entries]
    tok = _tokenizer_from(args)
    stats = corpus_stats.compute_stats(texts, tok)
    hist = corpus_stats.word_count_histogram(stats.per_clip_word_counts, args.bin_width)
    text = stats.format()
    text += f"Words/clip mean  {hist.mean:.2f}\nWords/clip std   {hist.std:.2f}\n\nbin_start\tcount\n"
    text += hist.format()
    if args.sweep:
        text += "\ntokenizer sweep vs reference counts\n"
        for t, st, deltas in corpus_stats.sweep_against(texts, corpus_stats.ETSL_REFERENCE_COUNTS):
            d = " ".join(f"{k}={v:+d}" for k, v in deltas.items())
            text += f"lowercase={t.lowercase} turkish={t.turkish} strip_punct={t.strip_punct}\t{d}\n"
    _emit(text, args.out)


def cmd_preprocess(args) -> None:
    cfg = build_run_config(args.config, _overrides(args))
    manifest = load_manifest(args.manifest, validate=True)
    out = Path(args.out)
    (out / "clips").mkdir(parents=True, exist_ok=True)
    entries = []
    for e in manifest:
        clip = normalized_clip(manifest.load_clip(e), policy=cfg.degenerate_policy, coord_count=cfg.coord_count)
        path = out / "clips" / f"{e.clip_id}.lmk"
        save_clip(clip, path)
        entries.append(ManifestEntry(e.clip_id, path.resolve(), e.split, e.transcript))
    write_manifest(entries, out / "manifest.tsv")
    print(f"normalized {len(entries)} clips into {out}")


def _setup_torch(cfg: RunConfig) -> None:
    torch.set_num_threads(cfg.threads)
    if cfg.threads == 1:
        torch.use_deterministic_algorithms(True)


def cmd_train(args) -> None:
    cfg = build_run_config(args.config, _overrides(args))
    device = _device(args.device)
    _setup_torch(cfg)
    manifest = load_manifest(args.manifest, validate=True)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.resolved").write_text(cfg.resolved_text())

    train_clips = manifest.load_split("train")
    dev_clips = manifest.load_split("dev")
    vocab = Vocabulary.build([c.transcript for c in train_clips], cfg.tokenizer())
    mcfg = cfg.model_config(len(vocab))
    fcfg = cfg.feature_config()
    train_set = make_examples(train_clips, vocab, cfg.variant, fcfg, mcfg.max_source_len, mcfg.max_target_len)
    dev_set = make_examples(dev_clips, vocab, cfg.variant, fcfg, mcfg.max_source_len, mcfg.max_target_len)

    torch.manual_seed(cfg.seed)
    model = SignTranslator(mcfg, cfg.variant, cfg.coord_count, cfg.gnn_out_dim, cfg.include_self).to(device)
    result = train(model, vocab, train_set, dev_set, cfg.train_config(), fcfg, out_dir=out)
    (out / "history.tsv").write_text(format_history(result.history))
    save_checkpoint(result.best, out / "best.ckpt")
    last = result.history[-1]
    print(f"trained {len(result.history)} epochs; best {cfg.dev_metric}="
          f"{result.best.train_state['best_dev_score']!r} at epoch {result.best.train_state['epoch']}; "
          f"final lr {last.lr!r}")


def _checkpoint_path(p: str) -> Path:
    path = Path(p)
    return path / "best.ckpt" if path.is_dir() else path


def cmd_translate(args) -> None:
    ckpt = load_checkpoint(_checkpoint_path(args.checkpoint))
    torch.set_num_threads(1)
    model = ckpt.build_model().to(_device(args.device))
    manifest = load_manifest(args.manifest, validate=True)
    clips = manifest.load_split(args.split)
    mcfg = ckpt.model_config
    examples = make_examples(clips, ckpt.vocab, ckpt.variant, ckpt.feature_config,
                             mcfg.max_source_len, mcfg.max_target_len)
    hyps = translate_examples(model, examples, mcfg.max_target_len)
    lines = [f"{e.clip_id}\t{ckpt.vocab.detokenize(h)}" for e, h in zip(examples, hyps)]
    _emit("\n".join(lines) + "\n", args.out)


def read_hypotheses(path: str | Path) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        cid, _, text = line.partition("\t")
        out[cid] = text
    return out


def cmd_evaluate(args) -> None:
    hyps = read_hypotheses(args.hyps)
    manifest = load_manifest(args.manifest)
    entries = manifest.split(args.split)
    missing = [e.clip_id for e in entries if e.clip_id not in hyps]
    if missing:
        raise MissingHypothesis(f"no hypothesis for clip_id {missing[0]} ({len(missing)} missing)")
    tok = _tokenizer_from(args)
    report = evaluate(
        [e.clip_id for e in entries],
        [tok(hyps[e.clip_id]) for e in entries],
        [tok(e.transcript) for e in entries],
    )
    out = args.out
    if out and Path(out).is_dir():
        out = str(Path(out) / "report.txt")
    _emit(report.format(), out)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="etsl", description="Pose-to-text sign language translation toolkit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic landmark dataset")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=1)
    s.add_argument("--n-clips", type=int, default=50)
    s.add_argument("--vocab-size", type=int, default=12)
    s.add_argument("--min-tokens", type=int, default=3)
    s.add_argument("--max-tokens", type=int, default=5)
    s.add_argument("--frames-per-token", type=int, default=6)
    s.add_argument("--noise-std", type=float, default=0.01)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("stats", help="corpus statistics over manifest transcripts")
    s.add_argument("--manifest", required=True)
    s.add_argument("--split", choices=SPLITS)
    s.add_argument("--config")
    s.add_argument("--bin-width", type=int, default=10)
    s.add_argument("--sweep", action="store_true", help="compare tokenizer settings to the reference counts")
    s.add_argument("--out")
    s.set_defaults(func=cmd_stats)

    s = sub.add_parser("preprocess", help="write shoulder-normalized landmark caches")
    s.add_argument("--manifest", required=True)
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.add_argument("--set", action="append", metavar="KEY=VALUE")
    s.set_defaults(func=cmd_preprocess)

    s = sub.add_parser("train", help="train a model into a run directory")
    s.add_argument("--manifest", required=True)
    s.add_argument("--config")
    s.add_argument("--variant", choices=VARIANTS)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.add_argument("--device", default="cpu")
    s.add_argument("--set", action="append", metavar="KEY=VALUE")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("translate", help="greedy-decode a split with a checkpoint")
    s.add_argument("--checkpoint", required=True, help="checkpoint file or run directory")
    s.add_argument("--manifest", required=True)
    s.add_argument("--split", choices=SPLITS, default="test")
    s.add_argument("--out")
    s.add_argument("--device", default="cpu")
    s.set_defaults(func=cmd_translate)

    s = sub.add_parser("evaluate", help="score a hypothesis file against manifest transcripts")
    s.add_argument("--hyps", required=True)
    s.add_argument("--manifest", required=True)
    s.add_argument("--split", choices=SPLITS, default="test")
    s.add_argument("--config")
    s.add_argument("--out")
    s.set_defaults(func=cmd_evaluate)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except EtslError as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: FileNotFound: {exc.filename}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
