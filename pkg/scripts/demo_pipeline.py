"""Miniature end-to-end tour: synthesize a corpus, train briefly, and render
a sheet plus both interpolation grids into ./demo_out.

    python scripts/demo_pipeline.py [--epochs 10]

This is a smoke demo, not the acceptance experiment; expect blobby glyphs at
low epoch counts.
"""

import argparse
import logging
from pathlib import Path

from wordglyph.corpus import save_fonts
from wordglyph.genkit import (SheetSpec, generate_sheet,
                              impression_interpolation_grid,
                              noise_interpolation_grid, write_outputs)
from wordglyph.lexicon import save_table, vocab_matrix
from wordglyph.nets import load_checkpoint
from wordglyph.synth import SynthConfig, synthesize_corpus, synthesize_embedding_table
from wordglyph.training import TrainConfig, train


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--epochs", type=int, default=10)
    parser.add_argument("--out", default="demo_out")
    args = parser.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    config = SynthConfig(n_fonts=40, attributes=("bold", "thin", "italic", "upright"),
                         tag_mode="single", seed=0)
    records, vocab = synthesize_corpus(config)
    table = synthesize_embedding_table(config.attributes, aliases={"fat": "bold"},
                                       dim=16, seed=1)
    save_fonts(records, vocab, out / "corpus")
    save_table(table, out / "embeddings.txt")

    result = train(TrainConfig(epochs=args.epochs, batch_size=64,
                               d_steps_per_g_step=1, seed=0),
                   records, vocab, vocab_matrix(table, vocab.words), "imp2font",
                   out / "run")
    bundle = load_checkpoint(result.final_checkpoint)

    cells, sidecar = generate_sheet(
        bundle, SheetSpec(text="HERONS", words=["bold"], n=4, seed=5), table,
        ckpt_path=result.final_checkpoint)
    write_outputs(cells, sidecar, out / "sheet_bold.png")

    cells, sidecar = impression_interpolation_grid(
        bundle, "italic", "upright", steps=8, text="ABC", seed=5, table=table,
        ckpt_path=result.final_checkpoint)
    write_outputs(cells, sidecar, out / "lerp_words.png")

    cells, sidecar = noise_interpolation_grid(
        bundle, ["bold"], 1, 2, steps=8, text="ABC", table=table,
        ckpt_path=result.final_checkpoint)
    write_outputs(cells, sidecar, out / "lerp_noise.png")
    print(f"demo artifacts in {out}/")


if __name__ == "__main__":
    main()
