"""HTTP service: prediction, recommendation and study-rating endpoints.

The service holds two immutable models (emotion classifier and
valence/arousal regressor) and serves them under ``/v1``. Uploaded images
are processed in memory and never persisted; only explicit rating records
are written, as line-delimited JSON appended under a lock.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from . import data, modelio
from .recommender import (
    AffectPrediction,
    ProviderConfig,
    ProviderError,
    RecommenderError,
    build_query,
    fetch,
    genre_map_from_env,
)

# The ten instructed emotions of the study flow, in presentation order.
STUDY_EMOTIONS = (
    "neutral",
    "delighted",
    "happy",
    "miserable",
    "sad",
    "surprised",
    "angry",
    "afraid",
    "disgusted",
    "contemptuous",
)


@dataclass
class ServiceConfig:
    classifier_path: str | None = None
    regressor_path: str | None = None
    ratings_path: str = "ratings.jsonl"
    provider: ProviderConfig = field(default_factory=ProviderConfig.from_env)
    genre_map: dict | None = None
    static_dir: str | None = None


class RatingsStore:
    """Append-only line-delimited JSON store for study rating records."""

    def __init__(self, path):
        self.path = path
        self._lock = threading.Lock()

    def append(self, record: dict) -> int:
        line = json.dumps(record, separators=(",", ":")) + "\n"
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line)
                fh.flush()
                os.fsync(fh.fileno())
            with open(self.path, encoding="utf-8") as fh:
                count = sum(1 for _ in fh)
        return count

    def records(self) -> list:
        if not os.path.exists(self.path):
            return []
        with self._lock:
            with open(self.path, encoding="utf-8") as fh:
                return [json.loads(line) for line in fh if line.strip()]

    def summary(self) -> dict:
        per = {name: [] for name in STUDY_EMOTIONS}
        for rec in self.records():
            emotion = rec.get("instructed_emotion")
            if emotion in per:
                per[emotion].append(rec["rating"])
        all_ratings = [r for ratings in per.values() for r in ratings]
        emotions = {
            name: {
                "mean_rating": round(sum(v) / len(v), 3) if v else None,
                "count": len(v),
            }
            for name, v in per.items()
        }
        return {
            "emotions": emotions,
            "overall": {
                "mean_rating": round(sum(all_ratings) / len(all_ratings), 3)
                if all_ratings
                else None,
                "count": len(all_ratings),
            },
        }


class PredictedAffect(BaseModel):
    emotion: str
    valence: float = Field(ge=-1.0, le=1.0)
    arousal: float = Field(ge=-1.0, le=1.0)


class RatingIn(BaseModel):
    session_id: str
    instructed_emotion: str
    rating: int = Field(ge=1, le=5)
    self_valence: float = Field(ge=-1.0, le=1.0)
    self_arousal: float = Field(ge=-1.0, le=1.0)
    track_ids: list[str] = Field(default_factory=list)
    predicted: PredictedAffect | None = None


class RecommendIn(BaseModel):
    emotion: str
    valence: float = Field(ge=-1.0, le=1.0)
    arousal: float = Field(ge=-1.0, le=1.0)
    limit: int = Field(default=5, ge=1, le=50)


def _parse_bbox(raw):
    if raw is None:
        return None
    try:
        parts = [float(v) for v in raw.split(",")]
    except ValueError:
        parts = []
    if len(parts) != 4:
        raise HTTPException(status_code=400, detail="bbox must be 'x,y,w,h'")
    return tuple(parts)


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    cfg = config or ServiceConfig()
    app = FastAPI(title="affectlite", version="1.0")

    classifier = modelio.load(cfg.classifier_path) if cfg.classifier_path else None
    regressor = modelio.load(cfg.regressor_path) if cfg.regressor_path else None
    store = RatingsStore(cfg.ratings_path)
    genre_map = cfg.genre_map if cfg.genre_map is not None else genre_map_from_env()

    app.state.classifier = classifier
    app.state.regressor = regressor
    app.state.ratings = store

    def _predict_affect(image_bytes: bytes, bbox) -> tuple[AffectPrediction, float]:
        if classifier is None or regressor is None:
            raise HTTPException(status_code=503, detail="models are not loaded")
        try:
            image = data.decode_image_bytes(image_bytes)
            tensor = data.preprocess(image, bbox)
        except data.DataError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        started = time.perf_counter()
        probs = classifier.forward(tensor).array
        va = regressor.forward(tensor).array
        latency_ms = (time.perf_counter() - started) * 1000.0
        return AffectPrediction(probs, float(va[0]), float(va[1])), latency_ms

    def _predict_payload(pred: AffectPrediction, latency_ms: float) -> dict:
        return {
            "emotion": pred.emotion,
            "emotion_id": pred.emotion_id,
            "probabilities": {
                name: pred.emotion_probs[i] for i, name in enumerate(data.EMOTIONS)
            },
            "valence": pred.valence,
            "arousal": pred.arousal,
            "models": {
                "classifier": classifier.arch_id if classifier else None,
                "regressor": regressor.arch_id if regressor else None,
            },
            "latency_ms": latency_ms,
        }

    @app.get("/v1/health")
    def health():
        return {
            "status": "ok",
            "models_loaded": classifier is not None and regressor is not None,
        }

    @app.post("/v1/predict")
    async def predict(request: Request, bbox: str | None = None):
        body = await request.body()
        if not body:
            raise HTTPException(status_code=400, detail="empty request body")
        pred, latency_ms = _predict_affect(body, _parse_bbox(bbox))
        return _predict_payload(pred, latency_ms)

    @app.post("/v1/recommend")
    async def recommend(request: Request, bbox: str | None = None, limit: int = 5):
        content_type = request.headers.get("content-type", "")
        if content_type.startswith("application/json"):
            raw = await request.body()
            try:
                body = RecommendIn.model_validate_json(raw)
            except ValueError as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from None
            try:
                pred = AffectPrediction.from_affect(body.emotion, body.valence, body.arousal)
            except RecommenderError as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from None
            limit = body.limit
        else:
            image_bytes = await request.body()
            if not image_bytes:
                raise HTTPException(status_code=400, detail="empty request body")
            pred, _ = _predict_affect(image_bytes, _parse_bbox(bbox))
        try:
            query = build_query(pred, genre_map, limit=limit)
            tracks = fetch(query, cfg.provider)
        except ProviderError as exc:
            raise HTTPException(status_code=502, detail=str(exc)) from None
        except RecommenderError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from None
        return {
            "query": {
                "seed_genres": list(query.seed_genres),
                "target_valence": query.target_valence,
                "target_energy": query.target_energy,
                "mode": query.mode,
                "limit": query.limit,
            },
            "affect": {
                "emotion": pred.emotion,
                "valence": pred.valence,
                "arousal": pred.arousal,
            },
            "tracks": [t.as_dict() for t in tracks],
        }

    @app.post("/v1/ratings", status_code=201)
    def post_rating(rating: RatingIn):
        if rating.instructed_emotion not in STUDY_EMOTIONS:
            return JSONResponse(
                status_code=422,
                content={
                    "detail": f"instructed_emotion must be one of {list(STUDY_EMOTIONS)}"
                },
            )
        record = rating.model_dump()
        record["timestamp"] = datetime.now(timezone.utc).isoformat()
        stored_id = store.append(record)
        return {"id": stored_id}

    @app.get("/v1/ratings/summary")
    def ratings_summary():
        return store.summary()

    if cfg.static_dir and os.path.isdir(cfg.static_dir):
        app.mount("/app", StaticFiles(directory=cfg.static_dir, html=True), name="app")

    @app.get("/")
    def index():
        return {
            "service": "affectlite",
            "endpoints": [
                "/v1/health",
                "/v1/predict",
                "/v1/recommend",
                "/v1/ratings",
                "/v1/ratings/summary",
            ],
        }

    return app
