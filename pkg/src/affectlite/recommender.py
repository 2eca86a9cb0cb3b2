"""Affect-driven music recommendation.

A prediction maps onto a provider query as follows: the predicted emotion
selects five seed genres from a configurable table, valence and arousal
translate linearly from [-1, 1] to the provider's [0, 1] targets (arousal
drives "energy"), and the key modality follows the sign of valence --
non-negative is major. The wire format matches the common recommendations
endpoint convention (GET with ``seed_genres``, ``target_valence``,
``target_energy``, ``target_mode``, ``limit``), so the bundled offline
mock and a real provider are interchangeable through configuration.
"""

from __future__ import annotations

import json
import os
import time
import urllib.parse
from dataclasses import dataclass

import numpy as np
import requests

from .data import EMOTIONS
from .tensor import Rng, as_array

MODE_MAJOR = "major"
MODE_MINOR = "minor"

ENV_BASE_URL = "RECOMMENDER_BASE_URL"
ENV_TOKEN = "RECOMMENDER_TOKEN"
ENV_GENRE_MAP = "GENRE_MAP_PATH"

# Illustrative defaults; override with a JSON file via GENRE_MAP_PATH.
DEFAULT_GENRE_MAP = {
    "neutral": ["acoustic", "ambient", "chill", "folk", "singer-songwriter"],
    "happy": ["pop", "dance", "funk", "disco", "summer"],
    "sad": ["sad", "piano", "rainy-day", "blues", "soul"],
    "surprised": ["edm", "electro", "power-pop", "dance", "club"],
    "afraid": ["ambient", "classical", "new-age", "soundtracks", "piano"],
    "disgusted": ["grunge", "punk", "industrial", "garage", "hard-rock"],
    "angry": ["metal", "hardcore", "punk-rock", "heavy-metal", "metalcore"],
    "contemptuous": ["jazz", "trip-hop", "alternative", "indie", "blues"],
}


class RecommenderError(RuntimeError):
    pass


class ProviderError(RecommenderError):
    def __init__(self, message, status=None):
        super().__init__(message)
        self.status = status


class AffectPrediction:
    """Classifier probabilities plus the regressed valence/arousal pair.

    The emotion label is always the argmax of the probabilities, and the
    continuous values are clamped to [-1, 1].
    """

    def __init__(self, emotion_probs, valence, arousal):
        probs = tuple(float(p) for p in np.asarray(as_array(emotion_probs)).reshape(-1))
        if len(probs) != len(EMOTIONS):
            raise RecommenderError(f"expected {len(EMOTIONS)} probabilities, got {len(probs)}")
        if abs(sum(probs) - 1.0) > 1e-3 or min(probs) < 0:
            raise RecommenderError("emotion probabilities must be non-negative and sum to 1")
        self.emotion_probs = probs
        self.emotion_id = int(np.argmax(probs))
        self.emotion = EMOTIONS[self.emotion_id]
        self.valence = float(min(1.0, max(-1.0, valence)))
        self.arousal = float(min(1.0, max(-1.0, arousal)))

    @classmethod
    def from_affect(cls, emotion, valence, arousal):
        """Build from an emotion name alone (one-hot probabilities)."""
        if emotion not in EMOTIONS:
            raise RecommenderError(f"unknown emotion {emotion!r}")
        probs = [0.0] * len(EMOTIONS)
        probs[EMOTIONS.index(emotion)] = 1.0
        return cls(probs, valence, arousal)

    def __repr__(self):
        return (
            f"AffectPrediction(emotion={self.emotion!r}, "
            f"valence={self.valence:.3f}, arousal={self.arousal:.3f})"
        )


@dataclass(frozen=True)
class Track:
    id: str
    title: str
    artist: str
    external_url: str

    def as_dict(self):
        return {
            "id": self.id,
            "title": self.title,
            "artist": self.artist,
            "external_url": self.external_url,
        }


@dataclass(frozen=True)
class RecommendationQuery:
    seed_genres: tuple
    target_valence: float
    target_energy: float
    mode: str
    limit: int = 5

    def __post_init__(self):
        if not 1 <= len(self.seed_genres) <= 5:
            raise RecommenderError(f"need 1-5 seed genres, got {len(self.seed_genres)}")
        for value, name in ((self.target_valence, "valence"), (self.target_energy, "energy")):
            if not 0.0 <= value <= 1.0:
                raise RecommenderError(f"target {name} {value} outside [0, 1]")
        if self.mode not in (MODE_MAJOR, MODE_MINOR):
            raise RecommenderError(f"mode must be major or minor, got {self.mode!r}")
        if self.limit < 1:
            raise RecommenderError("limit must be positive")


def load_genre_map(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    return _check_genre_map(raw)


def _check_genre_map(raw) -> dict:
    if set(raw) != set(EMOTIONS):
        raise RecommenderError(
            f"genre map must cover exactly the emotions {sorted(EMOTIONS)}, got {sorted(raw)}"
        )
    for emotion, seeds in raw.items():
        if len(seeds) != 5 or not all(isinstance(s, str) and s for s in seeds):
            raise RecommenderError(f"genre map entry {emotion!r} must list exactly 5 seed names")
    return {e: list(raw[e]) for e in EMOTIONS}


def genre_map_from_env() -> dict:
    path = os.environ.get(ENV_GENRE_MAP)
    return load_genre_map(path) if path else dict(DEFAULT_GENRE_MAP)


def build_query(pred: AffectPrediction, genre_map=None, limit: int = 5) -> RecommendationQuery:
    """Translate a prediction into a provider query.

    Targets map affinely from [-1, 1] to [0, 1]; modality is major for
    valence >= 0 (zero counts as positive), minor otherwise.
    """
    gm = _check_genre_map(genre_map) if genre_map is not None else dict(DEFAULT_GENRE_MAP)
    if pred.emotion not in gm:
        raise RecommenderError(f"emotion {pred.emotion!r} missing from the genre map")
    return RecommendationQuery(
        seed_genres=tuple(gm[pred.emotion]),
        target_valence=(pred.valence + 1.0) / 2.0,
        target_energy=(pred.arousal + 1.0) / 2.0,
        mode=MODE_MAJOR if pred.valence >= 0 else MODE_MINOR,
        limit=limit,
    )


def query_params(query: RecommendationQuery) -> dict:
    """Wire serialization: comma-joined seeds, targets at 3 decimals,
    mode as 1 (major) / 0 (minor)."""
    return {
        "seed_genres": ",".join(query.seed_genres),
        "target_valence": f"{query.target_valence:.3f}",
        "target_energy": f"{query.target_energy:.3f}",
        "target_mode": "1" if query.mode == MODE_MAJOR else "0",
        "limit": str(query.limit),
    }


@dataclass
class ProviderConfig:
    base_url: str = "mock://catalog"
    token: str | None = None
    timeout: float = 10.0
    max_attempts: int = 3
    backoff: float = 0.5

    @classmethod
    def from_env(cls) -> "ProviderConfig":
        return cls(
            base_url=os.environ.get(ENV_BASE_URL, "mock://catalog"),
            token=os.environ.get(ENV_TOKEN),
        )


def _parse_tracks(payload, limit) -> list:
    try:
        raw = payload["tracks"]
        tracks = [
            Track(
                id=str(t["id"]),
                title=str(t["name"]),
                artist=str(t["artists"][0]["name"]),
                external_url=str(t.get("external_urls", {}).get("spotify", "")),
            )
            for t in raw
        ]
    except (KeyError, IndexError, TypeError) as exc:
        raise ProviderError(f"malformed provider response: {exc!r}") from None
    if len({t.id for t in tracks}) != len(tracks):
        raise ProviderError("provider returned duplicate track ids")
    return tracks[:limit]


def fetch(query: RecommendationQuery, config: ProviderConfig | None = None) -> list:
    """Query the provider and return at most ``query.limit`` tracks in
    provider order. Network failures and 5xx retry with exponential backoff
    (at most ``max_attempts`` tries); 4xx surfaces immediately with the body.
    """
    cfg = config or ProviderConfig()
    params = query_params(query)
    if cfg.base_url.startswith("mock://"):
        provider = MockProvider.from_url(cfg.base_url)
        return _parse_tracks(provider.respond(params), query.limit)

    headers = {"Authorization": f"Bearer {cfg.token}"} if cfg.token else {}
    last_error = None
    for attempt in range(cfg.max_attempts):
        if attempt:
            time.sleep(min(cfg.backoff * 2 ** (attempt - 1), 8.0))
        try:
            resp = requests.get(cfg.base_url, params=params, headers=headers, timeout=cfg.timeout)
        except requests.RequestException as exc:
            last_error = ProviderError(f"provider unreachable: {exc}")
            continue
        if 400 <= resp.status_code < 500:
            raise ProviderError(
                f"provider rejected the request ({resp.status_code}): {resp.text[:500]}",
                status=resp.status_code,
            )
        if resp.status_code >= 500:
            last_error = ProviderError(
                f"provider error {resp.status_code}", status=resp.status_code
            )
            continue
        try:
            payload = resp.json()
        except ValueError:
            raise ProviderError("provider returned malformed JSON") from None
        return _parse_tracks(payload, query.limit)
    raise last_error


_WORDS_A = ("Midnight", "Golden", "Electric", "Silent", "Neon", "Velvet", "Wild", "Paper")
_WORDS_B = ("Horizon", "Echo", "River", "Satellite", "Garden", "Mirror", "Signal", "Harbor")
_ARTISTS = (
    "The Octaves",
    "Nova Daye",
    "Cobalt Parade",
    "June Atlas",
    "Low Meridian",
    "Field Notes",
    "Marble Coast",
    "Iris Vale",
)


class MockProvider:
    """Deterministic in-process recommendations endpoint.

    A seeded catalog of tracks, each with a (valence, energy) position;
    queries rank the catalog by Euclidean distance to the requested targets
    and return the closest entries, so identical queries always produce
    identical track lists.
    """

    def __init__(self, seed: int = 0, size: int = 200):
        rng = Rng(seed)
        self.seed = seed
        self.tracks = []
        for i in range(size):
            a = int(rng.integers(0, len(_WORDS_A)))
            b = int(rng.integers(0, len(_WORDS_B)))
            artist = _ARTISTS[int(rng.integers(0, len(_ARTISTS)))]
            valence = float(rng.random())
            energy = float(rng.random())
            track_id = f"mock{seed:02d}-{i:04d}"
            self.tracks.append(
                {
                    "id": track_id,
                    "name": f"{_WORDS_A[a]} {_WORDS_B[b]} #{i}",
                    "artist": artist,
                    "valence": valence,
                    "energy": energy,
                    "url": f"https://tracks.invalid/{track_id}",
                }
            )

    @classmethod
    def from_url(cls, url: str) -> "MockProvider":
        parsed = urllib.parse.urlparse(url)
        opts = dict(urllib.parse.parse_qsl(parsed.query))
        return cls(seed=int(opts.get("seed", 0)), size=int(opts.get("size", 200)))

    def respond(self, params: dict) -> dict:
        """Handle a wire-format query and return a wire-format response."""
        tv = float(params["target_valence"])
        te = float(params["target_energy"])
        limit = int(params.get("limit", 5))
        ranked = sorted(
            self.tracks,
            key=lambda t: ((t["valence"] - tv) ** 2 + (t["energy"] - te) ** 2, t["id"]),
        )
        return {
            "tracks": [
                {
                    "id": t["id"],
                    "name": t["name"],
                    "artists": [{"name": t["artist"]}],
                    "external_urls": {"spotify": t["url"]},
                }
                for t in ranked[:limit]
            ]
        }

    def recommend(self, query: RecommendationQuery) -> list:
        return _parse_tracks(self.respond(query_params(query)), query.limit)
