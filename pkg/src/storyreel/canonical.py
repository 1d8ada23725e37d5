"""Canonical serialization and content hashing.

Request hashes and the manifest must be stable across process restarts and
platforms, so everything that gets hashed goes through one JSON form:
sorted keys, no insignificant whitespace, ASCII escapes.
"""

import hashlib
import json
from typing import Any


def canonical_json(obj: Any) -> str:
    """Serialize to the single canonical JSON form used for hashing."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def hash_obj(obj: Any) -> str:
    """Hash of the canonical JSON form of ``obj``."""
    return sha256_hex(canonical_json(obj).encode("ascii"))


def hash_request(kind: str, payload: dict, fingerprint: str) -> str:
    """Cache key for one backend request.

    The backend fingerprint (model name + version) is part of the key so
    switching models invalidates prior cache entries.
    """
    return hash_obj({"kind": kind, "payload": payload, "fingerprint": fingerprint})
