"""Minimal ISO base-media (MP4) box surgery.

The built-in render engine encodes video with OpenCV, which writes an MP4
with no audio track. This module appends one: it parses the top-level box
layout, appends a second mdat holding raw 16-bit PCM, and rewrites moov with
an added 'sowt' (little-endian PCM) audio trak. Everything before moov stays
byte-identical, so the video track's chunk offsets remain valid.

'sowt' in MP4 is the QuickTime PCM convention; libavformat-based players
(VLC, ffplay, browsers) demux it. With an external ffmpeg engine configured
the pipeline produces AAC instead and this module is unused.
"""

import struct

import numpy as np

from .errors import ContractViolationError, CorruptAssetError

AUDIO_CHUNK_SAMPLES = 4096


def parse_boxes(data: bytes, start: int = 0, end: int | None = None) -> list[tuple[str, int, int]]:
    """Top-level (in the given range) boxes as (type, offset, size)."""
    end = len(data) if end is None else end
    out = []
    off = start
    while off + 8 <= end:
        size, typ = struct.unpack_from(">I4s", data, off)
        if size == 1:  # 64-bit largesize
            size = struct.unpack_from(">Q", data, off + 8)[0]
        elif size == 0:  # box extends to end of file
            size = end - off
        if size < 8 or off + size > end:
            raise CorruptAssetError(f"malformed box {typ!r} at offset {off}")
        out.append((typ.decode("latin1"), off, size))
        off += size
    if off != end:
        raise CorruptAssetError("trailing garbage after last box")
    return out


def _box(typ: bytes, payload: bytes) -> bytes:
    return struct.pack(">I4s", 8 + len(payload), typ) + payload


def _full_box(typ: bytes, version: int, flags: int, payload: bytes) -> bytes:
    return _box(typ, struct.pack(">B3s", version, flags.to_bytes(3, "big")) + payload)


_MATRIX_IDENTITY = struct.pack(">9i", 0x00010000, 0, 0, 0, 0x00010000, 0, 0, 0, 0x40000000)


def _audio_sample_entry(channels: int, sample_rate: int) -> bytes:
    payload = (b"\x00" * 6 + struct.pack(">H", 1)            # data_reference_index
               + struct.pack(">HHI", 0, 0, 0)                 # version, revision, vendor
               + struct.pack(">HHHH", channels, 16, 0, 0)     # channels, bits, compression, packet
               + struct.pack(">I", sample_rate << 16))        # 16.16 fixed
    return _box(b"sowt", payload)


def _build_audio_trak(track_id: int, n_samples: int, channels: int, sample_rate: int,
                      mvhd_timescale: int, chunk_offsets: list[int]) -> bytes:
    bytes_per_sample = 2 * channels
    duration_mvhd = int(round(n_samples / sample_rate * mvhd_timescale))

    tkhd = _full_box(b"tkhd", 0, 0x000003,
                     struct.pack(">IIII", 0, 0, track_id, 0)
                     + struct.pack(">I", duration_mvhd)
                     + b"\x00" * 8
                     + struct.pack(">HHHH", 0, 0, 0x0100, 0)  # layer, group, volume, pad
                     + _MATRIX_IDENTITY
                     + struct.pack(">II", 0, 0))              # width, height

    mdhd = _full_box(b"mdhd", 0, 0,
                     struct.pack(">IIII", 0, 0, sample_rate, n_samples)
                     + struct.pack(">HH", 0x55C4, 0))         # language 'und'
    hdlr = _full_box(b"hdlr", 0, 0,
                     struct.pack(">I4s", 0, b"soun") + b"\x00" * 12 + b"SoundHandler\x00")

    stsd = _full_box(b"stsd", 0, 0,
                     struct.pack(">I", 1) + _audio_sample_entry(channels, sample_rate))
    stts = _full_box(b"stts", 0, 0, struct.pack(">III", 1, n_samples, 1))

    n_chunks = len(chunk_offsets)
    full_chunks, remainder = divmod(n_samples, AUDIO_CHUNK_SAMPLES)
    stsc_entries = []
    if full_chunks > 0:
        stsc_entries.append((1, AUDIO_CHUNK_SAMPLES, 1))
    if remainder:
        stsc_entries.append((full_chunks + 1, remainder, 1))
    stsc = _full_box(b"stsc", 0, 0,
                     struct.pack(">I", len(stsc_entries))
                     + b"".join(struct.pack(">III", *e) for e in stsc_entries))
    stsz = _full_box(b"stsz", 0, 0, struct.pack(">II", bytes_per_sample, n_samples))
    stco = _full_box(b"stco", 0, 0,
                     struct.pack(">I", n_chunks)
                     + b"".join(struct.pack(">I", o) for o in chunk_offsets))

    stbl = _box(b"stbl", stsd + stts + stsc + stsz + stco)
    dref = _full_box(b"dref", 0, 0, struct.pack(">I", 1) + _full_box(b"url ", 0, 1, b""))
    minf = _box(b"minf", _full_box(b"smhd", 0, 0, struct.pack(">HH", 0, 0))
                + _box(b"dinf", dref) + stbl)
    mdia = _box(b"mdia", mdhd + hdlr + minf)
    return _box(b"trak", tkhd + mdia)


def _patch_mvhd(mvhd: bytes, audio_samples: int, sample_rate: int) -> tuple[bytes, int, int]:
    """Update duration and next_track_id; returns (box, timescale, audio_track_id)."""
    version = mvhd[8]
    buf = bytearray(mvhd)
    if version == 0:
        ts_off, dur_off = 20, 24
        timescale = struct.unpack_from(">I", buf, ts_off)[0]
        duration = struct.unpack_from(">I", buf, dur_off)[0]
        audio_dur = int(round(audio_samples / sample_rate * timescale))
        struct.pack_into(">I", buf, dur_off, max(duration, audio_dur))
    elif version == 1:
        ts_off, dur_off = 28, 32
        timescale = struct.unpack_from(">I", buf, ts_off)[0]
        duration = struct.unpack_from(">Q", buf, dur_off)[0]
        audio_dur = int(round(audio_samples / sample_rate * timescale))
        struct.pack_into(">Q", buf, dur_off, max(duration, audio_dur))
    else:
        raise CorruptAssetError(f"unsupported mvhd version {version}")
    next_id_off = len(buf) - 4
    track_id = struct.unpack_from(">I", buf, next_id_off)[0]
    struct.pack_into(">I", buf, next_id_off, track_id + 1)
    return bytes(buf), timescale, track_id


def mux_pcm_audio(video_mp4: bytes, samples: np.ndarray, sample_rate: int) -> bytes:
    """Add a PCM audio track to a video-only MP4.

    ``samples`` is float mono (n,) or stereo (n, 2) in [-1, 1]. The video
    bytes must have their mdat before moov (the layout our encoder writes);
    they are preserved verbatim so the video track needs no offset patching.
    """
    arr = np.asarray(samples, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    channels = arr.shape[1]
    if channels not in (1, 2):
        raise ContractViolationError("audio must be mono or stereo")
    pcm = np.clip(np.floor(arr * 32767.0 + 0.5), -32768, 32767).astype("<i2").tobytes()
    n_samples = arr.shape[0]
    if n_samples == 0:
        raise ContractViolationError("audio has no samples")

    top = parse_boxes(video_mp4)
    moov = [b for b in top if b[0] == "moov"]
    if len(moov) != 1:
        raise CorruptAssetError(f"expected exactly one moov box, found {len(moov)}")
    moov_type, moov_off, moov_size = moov[0]
    for typ, off, _size in top:
        if typ == "mdat" and off > moov_off:
            raise CorruptAssetError("mdat after moov is not supported by this muxer")
    trailing = [t for t, off, _ in top if off > moov_off and t != "free"]
    if trailing:
        raise CorruptAssetError(f"unexpected boxes after moov: {trailing}")

    prefix = video_mp4[:moov_off]
    audio_mdat = _box(b"mdat", pcm)
    payload_start = len(prefix) + 8
    bytes_per_sample = 2 * channels
    chunk_offsets = [payload_start + i * AUDIO_CHUNK_SAMPLES * bytes_per_sample
                     for i in range(0, (n_samples + AUDIO_CHUNK_SAMPLES - 1) // AUDIO_CHUNK_SAMPLES)]

    moov_children = parse_boxes(video_mp4, moov_off + 8, moov_off + moov_size)
    mvhd = [c for c in moov_children if c[0] == "mvhd"]
    if not mvhd:
        raise CorruptAssetError("moov has no mvhd")
    mvhd_bytes = video_mp4[mvhd[0][1]:mvhd[0][1] + mvhd[0][2]]
    patched_mvhd, timescale, track_id = _patch_mvhd(mvhd_bytes, n_samples, sample_rate)

    audio_trak = _build_audio_trak(track_id, n_samples, channels, sample_rate,
                                   timescale, chunk_offsets)

    new_children = b""
    last_trak_end = None
    for typ, off, size in moov_children:
        if typ == "mvhd":
            new_children += patched_mvhd
        else:
            new_children += video_mp4[off:off + size]
        if typ == "trak":
            last_trak_end = len(new_children)
    if last_trak_end is None:
        raise CorruptAssetError("moov has no video trak")
    new_children = new_children[:last_trak_end] + audio_trak + new_children[last_trak_end:]

    return prefix + audio_mdat + _box(b"moov", new_children)


def read_pcm_track(mp4_data: bytes) -> tuple[np.ndarray, int]:
    """Extract the PCM audio track written by mux_pcm_audio (for verification)."""
    top = parse_boxes(mp4_data)
    moov = next((b for b in top if b[0] == "moov"), None)
    if moov is None:
        raise CorruptAssetError("no moov box")
    for typ, off, size in parse_boxes(mp4_data, moov[1] + 8, moov[1] + moov[2]):
        if typ != "trak":
            continue
        info = _parse_audio_trak(mp4_data, off, size)
        if info is not None:
            return info
    raise CorruptAssetError("no PCM audio trak found")


def _find_descendant(data: bytes, start: int, size: int, path: list[str]):
    off, end = start + 8, start + size
    for want in path:
        found = None
        for typ, boff, bsize in parse_boxes(data, off, end):
            if typ == want:
                found = (boff, bsize)
                break
        if found is None:
            return None
        off, end = found[0] + 8, found[0] + found[1]
    return found


def _parse_audio_trak(data: bytes, trak_off: int, trak_size: int):
    stbl = _find_descendant(data, trak_off, trak_size, ["mdia", "minf", "stbl"])
    if stbl is None:
        return None
    boxes = {t: (o, s) for t, o, s in parse_boxes(data, stbl[0] + 8, stbl[0] + stbl[1])}
    if "stsd" not in boxes:
        return None
    stsd_off = boxes["stsd"][0]
    entry_type = data[stsd_off + 16 + 4:stsd_off + 16 + 8]
    if entry_type != b"sowt":
        return None
    channels = struct.unpack_from(">H", data, stsd_off + 16 + 24)[0]
    sample_rate = struct.unpack_from(">I", data, stsd_off + 16 + 32)[0] >> 16
    stsz_off = boxes["stsz"][0]
    sample_size, n_samples = struct.unpack_from(">II", data, stsz_off + 12)
    stco_off = boxes["stco"][0]
    n_chunks = struct.unpack_from(">I", data, stco_off + 12)[0]
    offsets = struct.unpack_from(f">{n_chunks}I", data, stco_off + 16)
    pcm = bytearray()
    remaining = n_samples
    for off in offsets:
        take = min(AUDIO_CHUNK_SAMPLES, remaining)
        pcm += data[off:off + take * sample_size]
        remaining -= take
    arr = np.frombuffer(bytes(pcm), dtype="<i2").reshape(-1, channels).astype(np.float64) / 32767.0
    if channels == 1:
        return arr[:, 0], sample_rate
    return arr, sample_rate
