"""Command line entry points: corpus synthesis, training, generation,
evaluation, serving, and embedding-table conversion."""

import argparse
import json
import sys
from pathlib import Path

from . import corpus as corpus_mod
from . import genkit, lexicon, synth
from .evalsuite import evaluate_run, leaderboard_append
from .nets import DESK_DIMS, PAPER_DIMS, load_checkpoint
from .training import TrainConfig, train

DIMS_PRESETS = {"desk": DESK_DIMS, "paper": PAPER_DIMS}


def read_tag_lists(root):
    root = Path(root)
    lists = []
    for d in sorted(p for p in root.iterdir() if p.is_dir()):
        tag_file = d / "tags.txt"
        if tag_file.is_file():
            lists.append([t.strip() for t in tag_file.read_text().splitlines() if t.strip()])
    return lists


def _load_dataset(data_dir, embeddings):
    table = lexicon.load_table(embeddings)
    vocab = corpus_mod.build_vocabulary(read_tag_lists(data_dir), table)
    records = corpus_mod.load_fonts(data_dir, vocab)
    return records, vocab, table


def cmd_synth(args):
    config = synth.SynthConfig.from_json(args.config) if args.config else synth.SynthConfig()
    records, vocab = synth.synthesize_corpus(config)
    corpus_mod.save_fonts(records, vocab, args.out)
    print(f"wrote {len(records)} fonts ({sum(len(r.glyphs) for r in records)} glyphs), "
          f"K={len(vocab)} -> {args.out}")
    if args.embeddings_out:
        table = synth.synthesize_embedding_table(
            config.attributes, config.aliases, dim=args.dim, seed=config.seed,
            extra_words=args.extra_words.split(",") if args.extra_words else ())
        lexicon.save_table(table, args.embeddings_out)
        print(f"wrote embedding table ({len(table)} words, D={table.dim}) "
              f"-> {args.embeddings_out}")


def cmd_train(args):
    records, vocab, table = _load_dataset(args.data, args.embeddings)
    config = TrainConfig.from_file(args.config) if args.config else TrainConfig(
        epochs=25, batch_size=64, seed=0)
    word_matrix = lexicon.vocab_matrix(table, vocab.words)
    result = train(config, records, vocab, word_matrix, args.variant, args.out,
                   dims=DIMS_PRESETS[args.dims], resume_from=args.resume)
    status = "diverged" if result.diverged else "done"
    print(f"{status}: final checkpoint {result.final_checkpoint}, log {result.log_path}")
    return 1 if result.diverged else 0


def _load_for_gen(args):
    bundle = load_checkpoint(args.ckpt).eval_mode()
    table = lexicon.load_table(args.embeddings) if args.embeddings else None
    return bundle, table


def _print_suggestions(table, words):
    for word in words:
        try:
            vec = lexicon.word_vector(table, word)
            near = [w for w, _ in lexicon.nearest_words(table, vec, topn=6) if w != word.lower()]
            print(f"{word}: nearest in table: {', '.join(near[:5])}")
        except (lexicon.WordNotFoundError, ValueError):
            alts = lexicon.suggest_alternatives(table, word)
            print(f"{word}: not resolvable; try: {', '.join(alts) or '(nothing close)'}")


def cmd_gen(args):
    bundle, table = _load_for_gen(args)
    words = args.words.split(",") if getattr(args, "words", None) else []
    weights = [float(w) for w in args.weights.split(",")] if getattr(args, "weights", None) else None
    if args.suggest and table is not None:
        _print_suggestions(table, words or [w for w in (getattr(args, "a", None),
                                                        getattr(args, "b", None)) if w])
    try:
        if args.gen_mode == "sheet":
            cells, sidecar = genkit.generate_sheet(
                bundle, genkit.SheetSpec(text=args.text, words=words, n=args.n,
                                         seed=args.seed, weights=weights),
                table, ckpt_path=args.ckpt)
        elif args.gen_mode == "lerp-words":
            cells, sidecar = genkit.impression_interpolation_grid(
                bundle, args.a, args.b, args.steps, args.text, args.seed, table,
                ckpt_path=args.ckpt)
        elif args.gen_mode == "lerp-noise":
            cells, sidecar = genkit.noise_interpolation_grid(
                bundle, words, args.seed_a, args.seed_b, args.steps, args.text,
                table, weights=weights, ckpt_path=args.ckpt)
        else:  # replay
            cells, sidecar = genkit.replay_sidecar(args.sidecar, bundle, table)
    except genkit.UnknownWordError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    png_path, sidecar_path = genkit.write_outputs(cells, sidecar, args.out)
    print(f"wrote {png_path} (+ {sidecar_path.name})")
    return 0


def cmd_eval(args):
    records, vocab, table = _load_dataset(args.data, args.embeddings)
    train_records = None
    if args.train_data:
        train_records = corpus_mod.load_fonts(args.train_data, vocab)
    bundle = load_checkpoint(args.ckpt)
    if list(bundle.vocab.words) != list(vocab.words):
        print("error: checkpoint vocabulary does not match the dataset", file=sys.stderr)
        return 2
    report = evaluate_run(args.ckpt, records, table, seed=args.seed,
                          train_records=train_records)
    report.to_json(args.report)
    print(f"fid={report.fid:.4f} map_train={report.map_train:.4f} "
          f"map_test={report.map_test:.4f} -> {args.report}")
    if args.leaderboard:
        leaderboard_append(args.leaderboard, report)
    return 0


def cmd_serve(args):
    from .service import run_server

    run_server(args.ckpt, args.embeddings, port=args.port, host=args.host,
               cors_origins=args.cors_origin.split(","))


def cmd_convert(args):
    n = lexicon.convert_binary_table(args.src, args.dest)
    print(f"converted {n} word vectors -> {args.dest}")


def build_parser():
    p = argparse.ArgumentParser(prog="wordglyph",
                                description="impression-conditioned glyph generation toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="write a synthetic corpus (and embedding table)")
    sp.add_argument("--config", help="SynthConfig JSON file")
    sp.add_argument("--out", required=True)
    sp.add_argument("--embeddings-out")
    sp.add_argument("--dim", type=int, default=16)
    sp.add_argument("--extra-words", default="")
    sp.set_defaults(func=cmd_synth)

    tp = sub.add_parser("train", help="train one variant on a dataset directory")
    tp.add_argument("--variant", required=True, choices=["cgan+", "acgan+", "cpgan+", "imp2font"])
    tp.add_argument("--data", required=True)
    tp.add_argument("--embeddings", required=True)
    tp.add_argument("--config", help="TrainConfig JSON/TOML file")
    tp.add_argument("--out", required=True)
    tp.add_argument("--dims", choices=list(DIMS_PRESETS), default="desk")
    tp.add_argument("--resume", help="trainer_state.pt to resume from")
    tp.set_defaults(func=cmd_train)

    gp = sub.add_parser("gen", help="generate sheets and interpolation grids")
    gsub = gp.add_subparsers(dest="gen_mode", required=True)

    def common_gen(spx, need_words=True):
        spx.add_argument("--ckpt", required=True)
        spx.add_argument("--embeddings")
        spx.add_argument("--text", default="ABC")
        spx.add_argument("--out", required=True)
        spx.add_argument("--suggest", action="store_true",
                         help="print nearest in-table words for the requested words")
        spx.set_defaults(func=cmd_gen)

    g1 = gsub.add_parser("sheet")
    common_gen(g1)
    g1.add_argument("--words", required=True, help="comma-separated impression words")
    g1.add_argument("--weights", help="comma-separated nonnegative weights")
    g1.add_argument("--n", type=int, default=4)
    g1.add_argument("--seed", type=int, default=0)

    g2 = gsub.add_parser("lerp-words")
    common_gen(g2, need_words=False)
    g2.add_argument("--a", required=True)
    g2.add_argument("--b", required=True)
    g2.add_argument("--steps", type=int, default=8)
    g2.add_argument("--seed", type=int, default=0)

    g3 = gsub.add_parser("lerp-noise")
    common_gen(g3)
    g3.add_argument("--words", required=True)
    g3.add_argument("--weights")
    g3.add_argument("--seed-a", type=int, required=True)
    g3.add_argument("--seed-b", type=int, required=True)
    g3.add_argument("--steps", type=int, default=8)

    g4 = gsub.add_parser("replay")
    common_gen(g4, need_words=False)
    g4.add_argument("--sidecar", required=True)

    ep = sub.add_parser("eval", help="score a checkpoint against a dataset")
    ep.add_argument("--ckpt", required=True)
    ep.add_argument("--data", required=True, help="real test dataset directory")
    ep.add_argument("--train-data", help="optional training dataset for probes")
    ep.add_argument("--embeddings", required=True)
    ep.add_argument("--seed", type=int, default=0)
    ep.add_argument("--report", required=True)
    ep.add_argument("--leaderboard")
    ep.set_defaults(func=cmd_eval)

    vp = sub.add_parser("serve", help="run the HTTP inference service")
    vp.add_argument("--ckpt", required=True)
    vp.add_argument("--embeddings")
    vp.add_argument("--port", type=int, default=8000)
    vp.add_argument("--host", default="127.0.0.1")
    vp.add_argument("--cors-origin", default="*")
    vp.set_defaults(func=cmd_serve)

    cp = sub.add_parser("convert-embeddings",
                        help="binary word-vector file -> text table format")
    cp.add_argument("--src", required=True)
    cp.add_argument("--dest", required=True)
    cp.set_defaults(func=cmd_convert)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args) or 0


if __name__ == "__main__":
    sys.exit(main())
