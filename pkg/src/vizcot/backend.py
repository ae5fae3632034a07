"""Chat-model backends: an OpenAI-compatible HTTP client and a scripted replay.

A request is an ordered list of ``(role, text)`` messages; a response is text.
The scripted backend replays canned responses keyed by a digest of the request,
which keeps every pipeline test deterministic and offline.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path
from typing import Callable, Protocol, Sequence

Message = tuple[str, str]  # (role in {"system", "user"}, text)


class BackendError(Exception):
    pass


class ModelClient(Protocol):
    def complete(self, messages: Sequence[Message], temperature: float = 0.0) -> str: ...


def chat(client: ModelClient, messages: Sequence[Message]) -> str:
    try:
        return client.complete(messages)
    except BackendError:
        raise
    except Exception as exc:
        raise BackendError(str(exc)) from exc


def request_digest(messages: Sequence[Message]) -> str:
    payload = json.dumps([[role, text] for role, text in messages], ensure_ascii=False)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class ScriptedClient:
    """Replays canned responses from a fixture mapping request digests to text."""

    def __init__(self, fixture: dict[str, str] | str | Path):
        if isinstance(fixture, (str, Path)):
            with open(fixture, encoding="utf-8") as f:
                fixture = json.load(f)
        self.responses: dict[str, str] = dict(fixture)

    def complete(self, messages: Sequence[Message], temperature: float = 0.0) -> str:
        digest = request_digest(messages)
        try:
            return self.responses[digest]
        except KeyError:
            raise ScriptMiss(digest, messages) from None

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.responses, f, indent=2, sort_keys=True)


class ScriptMiss(BackendError):
    """No canned response for this request; carries the digest for authoring."""

    def __init__(self, digest: str, messages: Sequence[Message]):
        super().__init__(f"no scripted response for request {digest}")
        self.digest = digest
        self.messages = messages


def record_script(runner: Callable[[ModelClient], object], responses: Sequence[str],
                  fixture: dict[str, str] | None = None) -> dict[str, str]:
    """Author a scripted fixture by replaying ``runner`` until it completes.

    ``responses`` are consumed in the order the runner issues requests: each
    replay proceeds through already-scripted requests deterministically, and
    the first unscripted request is assigned the next response.
    """
    fixture = dict(fixture or {})
    remaining = list(responses)
    while True:
        client = ScriptedClient(fixture)
        try:
            runner(client)
            return fixture
        except ScriptMiss as miss:
            if not remaining:
                raise BackendError("script ran out of responses") from miss
            fixture[miss.digest] = remaining.pop(0)


class HttpClient:
    """OpenAI-compatible chat-completions client."""

    def __init__(self, base_url: str, model: str, api_key: str | None = None, timeout: float = 60.0):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key = api_key if api_key is not None else os.environ.get("VIZCOT_API_KEY", "")
        self.timeout = timeout

    def complete(self, messages: Sequence[Message], temperature: float = 0.0) -> str:
        import requests

        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        body = {
            "model": self.model,
            "messages": [{"role": role, "content": text} for role, text in messages],
            "temperature": temperature,
        }
        try:
            resp = requests.post(
                f"{self.base_url}/chat/completions", json=body, headers=headers,
                timeout=self.timeout,
            )
            resp.raise_for_status()
            return resp.json()["choices"][0]["message"]["content"]
        except Exception as exc:
            raise BackendError(f"chat completion failed: {exc}") from exc


def client_from_spec(spec: str) -> ModelClient:
    """Build a client from a CLI backend spec: ``scripted:<fixture>`` or ``http:<url>#<model>``."""
    if spec.startswith("scripted:"):
        return ScriptedClient(spec.split(":", 1)[1])
    if spec.startswith("http:"):
        rest = spec.split(":", 1)[1]
        url, _, model = rest.partition("#")
        return HttpClient(url, model or "default")
    raise ValueError(f"unknown backend spec {spec!r}")
