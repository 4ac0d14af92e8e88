"""Label acquisition: backends that turn face images into (label, confidence)
observations, plus the positives-list filtering applied to them.

Three backends are provided:

* ``stub``   -- deterministic local detector for solid color fiducials,
                used as the test oracle for the whole pipeline;
* ``replay`` -- serves previously dumped labels keyed by image content hash;
* ``remote`` -- HTTP client for an external vision service, with bounded
                retries, exponential backoff and a global rate limit.
"""

from __future__ import annotations

import base64
import json
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    AuthError,
    ConfigurationError,
    QuotaExceededError,
    ReplayMissError,
    TransportError,
)
from .reproject import atomic_write_bytes, content_id, encode_image, pack_rgba32

ENV_BACKEND_KEY = "PRISMMAP_BACKEND_KEY"
ENV_BACKEND_URL = "PRISMMAP_BACKEND_URL"


def normalize_label(text: str) -> str:
    """Lowercase, trim, and collapse internal whitespace. Idempotent."""
    return " ".join(text.split()).lower()


@dataclass(frozen=True)
class LabelObservation:
    """One (label, confidence) tuple; the label is stored normalized."""

    label: str
    confidence: float

    def __post_init__(self):
        norm = normalize_label(self.label)
        if not norm:
            raise ValueError("label is empty after normalization")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")
        object.__setattr__(self, "label", norm)
        object.__setattr__(self, "confidence", float(self.confidence))


@dataclass(frozen=True)
class PositivesList:
    """Labels whose confidence strictly exceeded the threshold, with the max
    confidence ever observed for each."""

    entries: frozenset[str]
    provenance: Mapping[str, float]
    config_id: str
    sample_id: str
    threshold: float


def positives_for_map(
    per_face_observations: Iterable[Iterable[LabelObservation]],
    threshold: float,
    config_id: str = "",
    sample_id: str = "",
) -> PositivesList:
    """Union labels with confidence > threshold over all faces of one map.

    The comparison is strict: a confidence equal to the threshold is
    excluded. Duplicate labels collapse, keeping the highest confidence.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must be in [0, 1], got {threshold}")
    provenance: dict[str, float] = {}
    for face_obs in per_face_observations:
        for obs in face_obs:
            if obs.confidence > threshold:
                prev = provenance.get(obs.label)
                if prev is None or obs.confidence > prev:
                    provenance[obs.label] = obs.confidence
    return PositivesList(frozenset(provenance), provenance, config_id, sample_id, threshold)


# ---------------------------------------------------------------------------
# stub backend: fiducial detector
# ---------------------------------------------------------------------------

FIDUCIAL_WINDOW = 16
FIDUCIAL_MATCH_THRESHOLD = 0.98
FIDUCIAL_COLORS = (
    ("fiducial-red", (255, 0, 0)),
    ("fiducial-green", (0, 255, 0)),
    ("fiducial-blue", (0, 0, 255)),
)


def _max_window_fraction(mask: np.ndarray, window: int) -> float:
    """Largest fraction of set pixels in any window x window box."""
    h, w = mask.shape
    if h < window or w < window:
        return 0.0
    ii = np.zeros((h + 1, w + 1), dtype=np.int64)
    ii[1:, 1:] = mask.cumsum(axis=0, dtype=np.int64).cumsum(axis=1)
    sums = (
        ii[window:, window:]
        - ii[:-window, window:]
        - ii[window:, :-window]
        + ii[:-window, :-window]
    )
    return float(sums.max()) / float(window * window)


def find_fiducials(pixels: np.ndarray, window: int = FIDUCIAL_WINDOW,
                   match_threshold: float = FIDUCIAL_MATCH_THRESHOLD) -> list[LabelObservation]:
    """Search an image for solid pure-color squares.

    For each template color, slides a window x window box over the image
    and takes the best matched-pixel fraction m; a detection is emitted
    with confidence m whenever m >= match_threshold.
    """
    arr = np.asarray(pixels)
    h, w = arr.shape[:2]
    has_alpha = arr.shape[2] == 4
    packed = pack_rgba32(arr)
    alpha = 255 if has_alpha else 0  # opaque faces; padded RGB packs alpha 0
    found = []
    for name, color in FIDUCIAL_COLORS:
        word = np.array([(*color, alpha)], dtype=np.uint8).view(np.uint32)[0]
        mask = packed == word
        # Too few matching pixels anywhere means no window can qualify.
        if np.count_nonzero(mask) < match_threshold * window * window:
            continue
        m = _max_window_fraction(mask.reshape(h, w), window)
        if m >= match_threshold:
            found.append(LabelObservation(name, m))
    return found


class StubBackend:
    """Deterministic local detector; pure, safe for concurrent calls."""

    name = "stub"

    def __init__(self, window: int = FIDUCIAL_WINDOW,
                 match_threshold: float = FIDUCIAL_MATCH_THRESHOLD):
        self.window = window
        self.match_threshold = match_threshold

    def labels_for(self, pixels: np.ndarray) -> list[LabelObservation]:
        return find_fiducials(pixels, self.window, self.match_threshold)


# ---------------------------------------------------------------------------
# replay backend and dump files
# ---------------------------------------------------------------------------


def _parse_dump_records(data) -> list[dict]:
    return data if isinstance(data, list) else [data]


def load_label_dump(path: str | Path) -> dict[str, list[LabelObservation]]:
    """Read a dump file (single record or array) into hash -> observations."""
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    dump: dict[str, list[LabelObservation]] = {}
    for record in _parse_dump_records(data):
        dump[record["image"]] = [
            LabelObservation(item["label"], item["confidence"]) for item in record["labels"]
        ]
    return dump


def dump_records(labels_by_hash: Mapping[str, Sequence[LabelObservation]],
                 backend_name: str) -> list[dict]:
    """Serialize observations into dump records, sorted by image hash."""
    return [
        {
            "image": image_hash,
            "backend": backend_name,
            "labels": [
                {"label": obs.label, "confidence": obs.confidence} for obs in observations
            ],
        }
        for image_hash, observations in sorted(labels_by_hash.items())
    ]


def write_label_dump(records: list[dict], path: str | Path) -> None:
    atomic_write_bytes(Path(path), (json.dumps(records, indent=2) + "\n").encode("utf-8"))


class ReplayBackend:
    """Serves recorded labels; misses are hard errors naming the hash."""

    name = "replay"

    def __init__(self, dump: Mapping[str, Sequence[LabelObservation]] | str | Path):
        if isinstance(dump, (str, Path)):
            dump = load_label_dump(dump)
        self._dump = dict(dump)

    def labels_for(self, pixels: np.ndarray) -> list[LabelObservation]:
        key = content_id(np.asarray(pixels))
        if key not in self._dump:
            raise ReplayMissError(self.name, key)
        return list(self._dump[key])


# ---------------------------------------------------------------------------
# remote backend
# ---------------------------------------------------------------------------


class RateLimiter:
    """Global minimum spacing between calls; thread-safe."""

    def __init__(self, calls_per_second: float,
                 clock: Callable[[], float] = time.monotonic,
                 sleep: Callable[[float], None] = time.sleep):
        if calls_per_second <= 0:
            raise ValueError("calls_per_second must be positive")
        self._interval = 1.0 / calls_per_second
        self._clock = clock
        self._sleep = sleep
        self._lock = threading.Lock()
        self._next_allowed = 0.0

    def wait(self) -> None:
        with self._lock:
            now = self._clock()
            delay = self._next_allowed - now
            self._next_allowed = max(now, self._next_allowed) + self._interval
        if delay > 0:
            self._sleep(delay)


@dataclass(frozen=True)
class Adapter:
    """Provider-specific request builder / response parser pair."""

    build_request: Callable[[bytes, str], dict]
    parse_response: Callable[[dict], list[LabelObservation]]


def _generic_request(image_bytes: bytes, image_format: str) -> dict:
    return {
        "image": base64.b64encode(image_bytes).decode("ascii"),
        "format": image_format,
    }


def _generic_parse(payload: dict) -> list[LabelObservation]:
    observations = []
    for item in payload.get("labels", []):
        label = normalize_label(str(item["label"]))
        if label:
            observations.append(LabelObservation(label, float(item["confidence"])))
    return observations


ADAPTERS: dict[str, Adapter] = {"generic": Adapter(_generic_request, _generic_parse)}


def register_adapter(name: str, adapter: Adapter) -> None:
    ADAPTERS[name] = adapter


class RemoteBackend:
    """HTTP labeling client with bounded retries and a global rate limit.

    Retries transport failures, HTTP 429, and HTTP 5xx with exponential
    backoff; auth failures are surfaced immediately. After the retry
    budget is exhausted, a persistent 429 becomes a quota error.
    """

    name = "remote"

    def __init__(
        self,
        url: str,
        api_key: str,
        adapter: str = "generic",
        image_format: str = "jpeg",
        timeout: float = 30.0,
        max_retries: int = 3,
        backoff_base: float = 0.5,
        rate_limiter: RateLimiter | None = None,
        session=None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if not url:
            raise ConfigurationError(self.name, f"endpoint missing; set {ENV_BACKEND_URL}")
        if not api_key:
            raise ConfigurationError(self.name, f"API key missing; set {ENV_BACKEND_KEY}")
        if adapter not in ADAPTERS:
            raise ConfigurationError(self.name, f"unknown adapter {adapter!r}")
        self.url = url
        self.api_key = api_key
        self.adapter = ADAPTERS[adapter]
        self.image_format = image_format
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self.rate_limiter = rate_limiter
        self._sleep = sleep
        if session is None:
            import requests

            session = requests.Session()
        self._session = session

    @classmethod
    def from_environment(cls, **kwargs) -> "RemoteBackend":
        return cls(
            url=os.environ.get(ENV_BACKEND_URL, ""),
            api_key=os.environ.get(ENV_BACKEND_KEY, ""),
            **kwargs,
        )

    def labels_for(self, pixels: np.ndarray) -> list[LabelObservation]:
        import requests

        body = self.adapter.build_request(
            encode_image(np.asarray(pixels), self.image_format), self.image_format
        )
        headers = {"Authorization": f"Bearer {self.api_key}"}
        attempts = self.max_retries + 1
        last_failure = ""
        saw_quota = False
        for attempt in range(attempts):
            if self.rate_limiter is not None:
                self.rate_limiter.wait()
            try:
                response = self._session.post(
                    self.url, json=body, headers=headers, timeout=self.timeout
                )
            except requests.RequestException as exc:
                last_failure = f"transport failure: {exc}"
            else:
                if response.status_code in (401, 403):
                    raise AuthError(self.name, f"HTTP {response.status_code} from {self.url}")
                if response.status_code == 200:
                    return self.adapter.parse_response(response.json())
                saw_quota = response.status_code == 429
                last_failure = f"HTTP {response.status_code} from {self.url}"
            if attempt < attempts - 1:
                self._sleep(self.backoff_base * (2.0 ** attempt))
        if saw_quota:
            raise QuotaExceededError(self.name, f"{last_failure} after {attempts} attempts")
        raise TransportError(self.name, f"{last_failure} after {attempts} attempts")


# ---------------------------------------------------------------------------
# backend descriptor
# ---------------------------------------------------------------------------

BACKEND_KINDS = ("stub", "replay", "remote")


@dataclass(frozen=True)
class BackendDescriptor:
    """Declarative backend selection; exactly one kind's parameters may be set."""

    kind: str
    endpoint: str | None = None
    api_key: str | None = None
    replay_path: Path | None = None
    stub_window: int | None = None
    stub_match_threshold: float | None = None
    adapter: str = "generic"
    image_format: str = "jpeg"
    max_retries: int = 3
    rate_limit: float | None = None

    def __post_init__(self):
        if self.kind not in BACKEND_KINDS:
            raise ConfigurationError(self.kind, f"unknown backend kind {self.kind!r}")
        remote_params = self.endpoint is not None or self.api_key is not None
        replay_params = self.replay_path is not None
        stub_params = self.stub_window is not None or self.stub_match_threshold is not None
        populated = {
            "remote": remote_params,
            "replay": replay_params,
            "stub": stub_params,
        }
        for kind, has in populated.items():
            if has and kind != self.kind:
                raise ConfigurationError(
                    self.kind, f"{kind} parameters set on a {self.kind} descriptor"
                )

    def create(self):
        if self.kind == "stub":
            return StubBackend(
                self.stub_window or FIDUCIAL_WINDOW,
                self.stub_match_threshold or FIDUCIAL_MATCH_THRESHOLD,
            )
        if self.kind == "replay":
            if self.replay_path is None:
                raise ConfigurationError("replay", "replay backend needs a dump file path")
            return ReplayBackend(self.replay_path)
        url = self.endpoint if self.endpoint is not None else os.environ.get(ENV_BACKEND_URL, "")
        key = self.api_key if self.api_key is not None else os.environ.get(ENV_BACKEND_KEY, "")
        limiter = RateLimiter(self.rate_limit) if self.rate_limit else None
        return RemoteBackend(
            url,
            key,
            adapter=self.adapter,
            image_format=self.image_format,
            max_retries=self.max_retries,
            rate_limiter=limiter,
        )


def obtain_labels(face_pixels: np.ndarray, backend) -> list[LabelObservation]:
    """Run one face image through a backend; observations come back normalized."""
    return list(backend.labels_for(np.asarray(face_pixels)))
