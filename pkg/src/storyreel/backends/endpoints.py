"""Backend endpoint configuration and cache-keyed requests."""

from dataclasses import dataclass

from ..canonical import canonical_json, hash_request
from ..errors import ContractViolationError

BACKEND_KINDS = ("text", "image", "tts", "music", "vocal_separation", "depth_effect")

TRANSPORTS = ("mock", "remote_service", "local_process")

# Default model fingerprints for mock endpoints; part of every cache key so
# swapping the backing model invalidates prior results.
MOCK_FINGERPRINTS = {kind: f"mock-{kind}-v1" for kind in BACKEND_KINDS}


@dataclass(frozen=True)
class BackendEndpoint:
    kind: str
    transport: str = "mock"
    url: str | None = None
    auth_token_env_var: str | None = None
    command_template: str | None = None
    fingerprint: str | None = None  # model name + version
    timeout: float = 60.0
    max_retries: int = 2
    backoff_base_ms: float = 250.0

    def __post_init__(self):
        if self.kind not in BACKEND_KINDS:
            raise ContractViolationError(f"unknown backend kind {self.kind!r}")
        if self.transport not in TRANSPORTS:
            raise ContractViolationError(f"unknown transport {self.transport!r}")
        if self.timeout <= 0:
            raise ContractViolationError("endpoint timeout must be > 0")
        if self.max_retries < 0:
            raise ContractViolationError("max_retries must be >= 0")
        if self.transport == "remote_service" and not self.url:
            raise ContractViolationError(f"remote {self.kind} endpoint needs a url")
        if self.transport == "local_process" and not self.command_template:
            raise ContractViolationError(
                f"local_process {self.kind} endpoint needs a command template")
        if self.fingerprint is None:
            object.__setattr__(self, "fingerprint", MOCK_FINGERPRINTS[self.kind])

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "transport": self.transport,
            "url": self.url,
            "auth_token_env_var": self.auth_token_env_var,
            "command_template": self.command_template,
            "fingerprint": self.fingerprint,
            "timeout": self.timeout,
            "max_retries": self.max_retries,
            "backoff_base_ms": self.backoff_base_ms,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BackendEndpoint":
        return cls(**d)


@dataclass(frozen=True)
class GenerationRequest:
    kind: str
    payload: dict
    fingerprint: str

    @property
    def canonical_payload(self) -> str:
        return canonical_json(self.payload)

    @property
    def request_hash(self) -> str:
        return hash_request(self.kind, self.payload, self.fingerprint)


def default_mock_endpoints() -> dict[str, BackendEndpoint]:
    return {kind: BackendEndpoint(kind=kind, transport="mock")
            for kind in BACKEND_KINDS}
