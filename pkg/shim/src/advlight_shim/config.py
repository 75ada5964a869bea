"""Server configuration."""

from dataclasses import dataclass

DEFAULT_MAX_REQUEST_BYTES = 64 * 1024 * 1024


@dataclass(frozen=True)
class ShimConfig:
    host: str = "127.0.0.1"
    port: int = 8700
    relight_model: str = "echo"
    victim_model: str = "echo"
    device: str = "cpu"
    max_request_bytes: int = DEFAULT_MAX_REQUEST_BYTES

    def __post_init__(self):
        if not self.host:
            raise ValueError("host must be non-empty")
        if not 1 <= self.port <= 65535:
            raise ValueError(f"port must be in [1, 65535], got {self.port}")
        if self.max_request_bytes <= 0:
            raise ValueError(f"max_request_bytes must be positive, got {self.max_request_bytes}")
        if not self.relight_model:
            raise ValueError("relight_model must be non-empty")
        if not self.victim_model:
            raise ValueError("victim_model must be non-empty")
