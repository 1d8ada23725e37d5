"""Local-process adapter: run a command template, exchange files.

Templates use {input}, {output} and {seed} placeholders; exit code 0 means
success. Used for tools like vocal separators or depth-effect renderers that
ship as standalone programs.
"""

import shlex
import subprocess
import tempfile
from pathlib import Path

from ..errors import BackendTimeoutError, TransientBackendError
from .endpoints import BackendEndpoint


def run_process_adapter(endpoint: BackendEndpoint, input_bytes: bytes | None,
                        seed: int, input_suffix: str = ".bin",
                        output_suffix: str = ".bin") -> bytes:
    """Run the endpoint's command with temp input/output files, return output bytes."""
    with tempfile.TemporaryDirectory(prefix="storyreel-proc-") as tmp:
        in_path = Path(tmp) / f"input{input_suffix}"
        out_path = Path(tmp) / f"output{output_suffix}"
        if input_bytes is not None:
            in_path.write_bytes(input_bytes)
        cmd = endpoint.command_template.format(
            input=str(in_path), output=str(out_path), seed=seed)
        try:
            proc = subprocess.run(shlex.split(cmd), capture_output=True,
                                  timeout=endpoint.timeout)
        except subprocess.TimeoutExpired as exc:
            raise BackendTimeoutError(
                f"{endpoint.kind} process timed out after {endpoint.timeout}s") from exc
        except OSError as exc:
            raise TransientBackendError(f"{endpoint.kind} process failed to start: {exc}") from exc
        if proc.returncode != 0:
            stderr = proc.stderr.decode("utf-8", "replace")[-500:]
            raise TransientBackendError(
                f"{endpoint.kind} process exited {proc.returncode}: {stderr}")
        if not out_path.exists():
            raise TransientBackendError(f"{endpoint.kind} process produced no output file")
        return out_path.read_bytes()
