"""WAV PCM 16-bit read/write. Samples are float arrays in [-1, 1] in memory."""

import io
import wave

import numpy as np


def write_wav_bytes(samples: np.ndarray, sample_rate: int) -> bytes:
    """Encode float samples to 16-bit PCM WAV bytes.

    ``samples`` is (n,) mono or (n, channels). Values outside [-1, 1] clip.
    """
    arr = np.asarray(samples, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    pcm = np.clip(np.floor(arr * 32767.0 + 0.5), -32768, 32767).astype("<i2")
    buf = io.BytesIO()
    with wave.open(buf, "wb") as w:
        w.setnchannels(arr.shape[1])
        w.setsampwidth(2)
        w.setframerate(sample_rate)
        w.writeframes(pcm.tobytes())
    return buf.getvalue()


def read_wav_bytes(data: bytes) -> tuple[np.ndarray, int]:
    """Decode WAV bytes to (float64 samples in [-1, 1], sample_rate).

    Output shape is (n,) for mono, (n, channels) otherwise.
    """
    with wave.open(io.BytesIO(data), "rb") as w:
        rate = w.getframerate()
        channels = w.getnchannels()
        width = w.getsampwidth()
        raw = w.readframes(w.getnframes())
    if width != 2:
        raise ValueError(f"only 16-bit PCM WAV supported, got {8 * width}-bit")
    pcm = np.frombuffer(raw, dtype="<i2").reshape(-1, channels)
    samples = pcm.astype(np.float64) / 32767.0
    if channels == 1:
        return samples[:, 0], rate
    return samples, rate


def read_wav_file(path: str) -> tuple[np.ndarray, int]:
    with open(path, "rb") as f:
        return read_wav_bytes(f.read())


def wav_info(data: bytes) -> tuple[int, int, float]:
    """(sample_rate, channels, duration_seconds) without decoding samples."""
    with wave.open(io.BytesIO(data), "rb") as w:
        rate = w.getframerate()
        channels = w.getnchannels()
        frames = w.getnframes()
    return rate, channels, frames / float(rate)


def resample_linear(samples: np.ndarray, src_rate: int, dst_rate: int) -> np.ndarray:
    """Linear-interpolation resample of mono float samples."""
    if src_rate == dst_rate or len(samples) == 0:
        return np.asarray(samples, dtype=np.float64)
    n_out = int(np.floor(len(samples) * dst_rate / src_rate + 0.5))
    x_out = np.arange(n_out) * (src_rate / dst_rate)
    return np.interp(x_out, np.arange(len(samples)), samples)


def to_mono(samples: np.ndarray) -> np.ndarray:
    if samples.ndim == 1:
        return samples
    return samples.mean(axis=1)
