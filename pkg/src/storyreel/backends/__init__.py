from .endpoints import BackendEndpoint, GenerationRequest, BACKEND_KINDS
from .gateway import Gateway

__all__ = ["BackendEndpoint", "GenerationRequest", "BACKEND_KINDS", "Gateway"]
