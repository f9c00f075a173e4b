"""Regenerate the frozen forward-pass regression tensors.

Run from the repo root after an intentional architecture change:
    python scripts/make_golden.py
"""

from pathlib import Path

import numpy as np

from wordglyph.nets import DESK_DIMS, build_variant, generator_forward

GOLDEN_DIR = Path(__file__).resolve().parent.parent / "tests" / "golden"


def main():
    GOLDEN_DIR.mkdir(parents=True, exist_ok=True)
    k, d, seed = 6, 16, 1234
    bundle = build_variant("imp2font", k=k, d=d, rng_seed=seed, dims=DESK_DIMS)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((3, DESK_DIMS.noise_dim)).astype(np.float32)
    c = np.eye(26, dtype=np.float32)[[0, 7, 25]]
    cond = rng.standard_normal((3, d)).astype(np.float32)
    out = generator_forward(bundle, z, c, cond)
    np.savez(GOLDEN_DIR / "generator_forward_desk.npz", z=z, c=c, cond=cond, out=out,
             k=k, d=d, seed=seed)
    print(f"wrote {GOLDEN_DIR / 'generator_forward_desk.npz'} (out shape {out.shape})")


if __name__ == "__main__":
    main()
