"""HTTP adapters for live generative services.

Shapes follow the common self-hosted conventions: an OpenAI-completions
compatible text endpoint, a Stable-Diffusion-webui compatible txt2img
endpoint, and a Mimic3-server compatible TTS endpoint. These paths are not
exercised in CI (no live services); errors map onto the gateway's retry
classification.
"""

import base64
import os

import requests

from ..errors import (BackendAuthError, BackendTimeoutError,
                      MalformedResponseError, TransientBackendError)
from .endpoints import BackendEndpoint


def _auth_headers(endpoint: BackendEndpoint) -> dict:
    headers = {}
    if endpoint.auth_token_env_var:
        token = os.environ.get(endpoint.auth_token_env_var, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
    return headers


def _post_json(endpoint: BackendEndpoint, body: dict) -> requests.Response:
    try:
        resp = requests.post(endpoint.url, json=body, timeout=endpoint.timeout,
                             headers=_auth_headers(endpoint))
    except requests.Timeout as exc:
        raise BackendTimeoutError(f"{endpoint.kind} backend timed out: {exc}") from exc
    except requests.ConnectionError as exc:
        raise TransientBackendError(f"{endpoint.kind} backend unreachable: {exc}") from exc
    if resp.status_code in (401, 403):
        raise BackendAuthError(f"{endpoint.kind} backend rejected credentials "
                               f"(HTTP {resp.status_code})")
    if resp.status_code >= 500:
        raise TransientBackendError(f"{endpoint.kind} backend HTTP {resp.status_code}")
    if resp.status_code != 200:
        raise MalformedResponseError(
            f"{endpoint.kind} backend HTTP {resp.status_code}: {resp.text[:200]}")
    return resp


def remote_complete_text(payload: dict, endpoint: BackendEndpoint) -> str:
    body = {"prompt": payload["prompt"], "max_tokens": payload.get("max_tokens", 1024),
            "seed": payload.get("seed")}
    resp = _post_json(endpoint, body)
    try:
        data = resp.json()
    except ValueError as exc:
        raise MalformedResponseError(f"text backend returned non-JSON: {exc}") from exc
    if isinstance(data.get("choices"), list) and data["choices"]:
        return data["choices"][0].get("text", "")
    if "text" in data:
        return data["text"]
    raise MalformedResponseError("text backend response has no completion field")


def remote_generate_image(payload: dict, endpoint: BackendEndpoint) -> tuple[bytes, bool]:
    body = {"prompt": payload["prompt"], "seed": payload["seed"],
            "width": payload["width"], "height": payload["height"]}
    resp = _post_json(endpoint, body)
    try:
        data = resp.json()
    except ValueError as exc:
        raise MalformedResponseError(f"image backend returned non-JSON: {exc}") from exc
    images = data.get("images")
    if not images:
        raise MalformedResponseError("image backend response has no images")
    try:
        png = base64.b64decode(images[0])
    except Exception as exc:
        raise MalformedResponseError(f"image backend base64 decode failed: {exc}") from exc
    nsfw = bool(data.get("nsfw", [False])[0]) if isinstance(data.get("nsfw"), list) \
        else bool(data.get("nsfw", False))
    return png, nsfw


def remote_synthesize_speech(payload: dict, endpoint: BackendEndpoint) -> bytes:
    # Mimic3-server shape: POST text, voice/length as query parameters, WAV back.
    try:
        resp = requests.post(
            endpoint.url,
            params={"voice": payload["voice"], "lengthScale": payload["length_scale"]},
            data=payload["text"].encode("utf-8"),
            timeout=endpoint.timeout, headers=_auth_headers(endpoint))
    except requests.Timeout as exc:
        raise BackendTimeoutError(f"tts backend timed out: {exc}") from exc
    except requests.ConnectionError as exc:
        raise TransientBackendError(f"tts backend unreachable: {exc}") from exc
    if resp.status_code in (401, 403):
        raise BackendAuthError(f"tts backend rejected credentials (HTTP {resp.status_code})")
    if resp.status_code >= 500:
        raise TransientBackendError(f"tts backend HTTP {resp.status_code}")
    if resp.status_code != 200 or not resp.content:
        raise MalformedResponseError(f"tts backend HTTP {resp.status_code}")
    return resp.content


def remote_generate_music(payload: dict, endpoint: BackendEndpoint) -> bytes:
    body = {"preset": payload.get("preset"), "seed": payload.get("seed"),
            "duration": payload["target_duration"]}
    resp = _post_json(endpoint, body)
    if resp.headers.get("content-type", "").startswith("audio/"):
        return resp.content
    try:
        data = resp.json()
        return base64.b64decode(data["audio"])
    except Exception as exc:
        raise MalformedResponseError(f"music backend response unusable: {exc}") from exc
