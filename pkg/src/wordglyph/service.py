"""Thin stateless HTTP inference service over the generation toolkit.

One checkpoint per process, loaded at startup. Requests are pure functions
of their payload: the same request (seed included) always returns the same
image bytes, so clients can treat responses as reproducible artifacts.
"""

import base64
import time
from typing import Optional

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, Field

from .corpus import LETTERS
from .genkit import (SheetSpec, UnknownWordError, assemble_grid, encode_png,
                     generate_sheet, impression_interpolation_grid,
                     noise_interpolation_grid)
from .lexicon import load_table
from .nets import checkpoint_id, load_checkpoint

MAX_TEXT = 32
MAX_VARIANTS = 16
MAX_STEPS = 16


class WordWeight(BaseModel):
    word: str
    weight: float = Field(default=1.0, ge=0.0)


class GenerateRequest(BaseModel):
    words: list[WordWeight] = []
    text: str = "A"
    n: int = 1
    seed: int = 0
    mode: str = "sheet"
    steps: Optional[int] = None
    word_a: Optional[str] = None
    word_b: Optional[str] = None
    seed_a: Optional[int] = None
    seed_b: Optional[int] = None


def _invariant(condition, message):
    if not condition:
        raise HTTPException(status_code=422, detail=message)


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def create_app(checkpoint=None, embeddings=None, cors_origins=("*",)) -> FastAPI:
    app = FastAPI(title="wordglyph service")
    app.add_middleware(CORSMiddleware, allow_origins=list(cors_origins),
                       allow_methods=["*"], allow_headers=["*"])
    app.state.bundle = None
    app.state.table = None
    app.state.checkpoint_path = None
    if checkpoint is not None:
        app.state.bundle = load_checkpoint(checkpoint).eval_mode()
        app.state.checkpoint_path = str(checkpoint)
        app.state.checkpoint_id = checkpoint_id(checkpoint)
    if embeddings is not None:
        app.state.table = load_table(embeddings)

    def _require_model():
        if app.state.bundle is None:
            raise HTTPException(status_code=503, detail="model not loaded")
        return app.state.bundle

    @app.get("/api/health")
    def health():
        bundle = _require_model()
        return {"status": "ok", "checkpoint_id": app.state.checkpoint_id,
                "k": bundle.k, "d": bundle.d, "variant": bundle.variant}

    @app.get("/api/vocab")
    def vocab(max_extra: int = 10000):
        bundle = _require_model()
        entries = [{"word": w, "count": int(c), "learned": True}
                   for w, c in zip(bundle.vocab.words, bundle.vocab.counts)]
        extra = []
        if app.state.table is not None:
            known = set(bundle.vocab.words)
            for w in app.state.table.words():
                if w not in known:
                    extra.append({"word": w, "count": 0, "learned": False})
                    if len(extra) >= max_extra:
                        break
        return {"k": bundle.k, "words": entries, "unlearned": extra}

    @app.post("/api/generate")
    def generate(req: GenerateRequest):
        bundle = _require_model()
        t0 = time.perf_counter()
        _invariant(0 < len(req.text) <= MAX_TEXT, f"text length must be 1..{MAX_TEXT}")
        _invariant(all(ch in LETTERS for ch in req.text), "text must be uppercase A-Z")
        _invariant(1 <= req.n <= MAX_VARIANTS, f"n must be 1..{MAX_VARIANTS}")
        _invariant(req.mode in ("sheet", "lerp-words", "lerp-noise"),
                   f"unknown mode {req.mode!r}")
        words = [w.word for w in req.words]
        weights = [w.weight for w in req.words]
        if req.mode in ("sheet", "lerp-noise"):
            _invariant(len(words) >= 1, "need at least one word")
            _invariant(sum(weights) > 0, "weights must sum to a positive value")
        try:
            if req.mode == "sheet":
                cells, sidecar = generate_sheet(
                    bundle,
                    SheetSpec(text=req.text, words=words, n=req.n, seed=req.seed,
                              weights=weights),
                    app.state.table, ckpt_path=app.state.checkpoint_path)
            elif req.mode == "lerp-words":
                _invariant(req.word_a and req.word_b, "lerp-words needs word_a and word_b")
                _invariant(req.steps and 2 <= req.steps <= MAX_STEPS,
                           f"steps must be 2..{MAX_STEPS}")
                cells, sidecar = impression_interpolation_grid(
                    bundle, req.word_a, req.word_b, req.steps, req.text, req.seed,
                    app.state.table, ckpt_path=app.state.checkpoint_path)
            else:
                _invariant(req.steps and 2 <= req.steps <= MAX_STEPS,
                           f"steps must be 2..{MAX_STEPS}")
                _invariant(req.seed_a is not None and req.seed_b is not None,
                           "lerp-noise needs seed_a and seed_b")
                cells, sidecar = noise_interpolation_grid(
                    bundle, words, req.seed_a, req.seed_b, req.steps, req.text,
                    app.state.table, weights=weights,
                    ckpt_path=app.state.checkpoint_path)
        except UnknownWordError as exc:
            raise HTTPException(status_code=400, detail={
                "error": str(exc), "word": exc.word, "suggestions": exc.suggestions})
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))

        rows, cols = cells.shape[:2]
        images = [_b64(encode_png(cells[r, c])) for r in range(rows) for c in range(cols)]
        payload = {
            "images": images,
            "grid_png": _b64(encode_png(assemble_grid(cells))),
            "grid": {"rows": rows, "cols": cols, "cell": [64, 64]},
            "condition_summary": sidecar.get("condition_info", []),
            "sidecar": sidecar,
            "timing_ms": round((time.perf_counter() - t0) * 1000.0, 3),
        }
        return payload

    return app


def run_server(checkpoint, embeddings, port=8000, host="127.0.0.1", cors_origins=("*",)):
    import uvicorn

    app = create_app(checkpoint, embeddings, cors_origins)
    uvicorn.run(app, host=host, port=port)
