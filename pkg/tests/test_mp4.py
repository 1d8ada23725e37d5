import cv2
import numpy as np
import pytest

from storyreel import mp4
from storyreel.errors import CorruptAssetError


def make_video_mp4(path: str, n_frames: int = 30, fps: float = 25.0,
                   size: tuple[int, int] = (128, 96)) -> bytes:
    writer = cv2.VideoWriter(str(path), cv2.VideoWriter_fourcc(*"mp4v"), fps, size)
    for i in range(n_frames):
        frame = np.full((size[1], size[0], 3), (i * 5) % 255, np.uint8)
        writer.write(frame)
    writer.release()
    with open(path, "rb") as f:
        return f.read()


class TestParse:
    def test_top_level_layout(self, tmp_path):
        data = make_video_mp4(tmp_path / "v.mp4")
        types = [t for t, _, _ in mp4.parse_boxes(data)]
        assert "moov" in types and "mdat" in types
        assert types.index("mdat") < types.index("moov")

    def test_garbage_rejected(self):
        with pytest.raises(CorruptAssetError):
            mp4.parse_boxes(b"this is not an mp4 file at all....")


class TestMux:
    def _sine(self, seconds, rate=44100):
        t = np.arange(round(seconds * rate)) / rate
        return 0.5 * np.sin(2 * np.pi * 440 * t)

    def test_pcm_round_trip(self, tmp_path):
        video = make_video_mp4(tmp_path / "v.mp4")
        audio = self._sine(1.2)
        muxed = mp4.mux_pcm_audio(video, audio, 44100)
        extracted, rate = mp4.read_pcm_track(muxed)
        assert rate == 44100
        assert len(extracted) == len(audio)
        np.testing.assert_allclose(extracted, audio, atol=1.0 / 32767)

    def test_video_track_still_decodable(self, tmp_path):
        video = make_video_mp4(tmp_path / "v.mp4", n_frames=40)
        muxed = mp4.mux_pcm_audio(video, self._sine(2.0), 44100)
        out = tmp_path / "muxed.mp4"
        out.write_bytes(muxed)
        cap = cv2.VideoCapture(str(out))
        assert cap.isOpened()
        n = 0
        while cap.read()[0]:
            n += 1
        cap.release()
        assert n == 40

    def test_video_bytes_preserved_verbatim(self, tmp_path):
        video = make_video_mp4(tmp_path / "v.mp4")
        moov_off = next(off for t, off, _ in mp4.parse_boxes(video) if t == "moov")
        muxed = mp4.mux_pcm_audio(video, self._sine(0.5), 44100)
        assert muxed[:moov_off] == video[:moov_off]

    def test_container_duration_is_max(self, tmp_path):
        # 30 frames @ 25fps = 1.2s video; 3.0s audio -> mvhd says 3.0s
        video = make_video_mp4(tmp_path / "v.mp4", n_frames=30, fps=25.0)
        muxed = mp4.mux_pcm_audio(video, self._sine(3.0), 44100)
        top = mp4.parse_boxes(muxed)
        moov_off = next(off for t, off, _ in top if t == "moov")
        moov_size = next(s for t, off, s in top if t == "moov")
        mvhd_off = next(off for t, off, _ in
                        mp4.parse_boxes(muxed, moov_off + 8, moov_off + moov_size)
                        if t == "mvhd")
        import struct
        timescale = struct.unpack_from(">I", muxed, mvhd_off + 20)[0]
        duration = struct.unpack_from(">I", muxed, mvhd_off + 24)[0]
        assert duration / timescale == pytest.approx(3.0, abs=0.01)

    def test_stereo_round_trip(self, tmp_path):
        video = make_video_mp4(tmp_path / "v.mp4")
        mono = self._sine(0.7)
        stereo = np.stack([mono, 0.25 * mono], axis=1)
        muxed = mp4.mux_pcm_audio(video, stereo, 44100)
        extracted, rate = mp4.read_pcm_track(muxed)
        assert extracted.shape == stereo.shape
        np.testing.assert_allclose(extracted, stereo, atol=1.0 / 32767)

    def test_deterministic(self, tmp_path):
        video = make_video_mp4(tmp_path / "v.mp4")
        audio = self._sine(1.0)
        assert mp4.mux_pcm_audio(video, audio, 44100) == \
            mp4.mux_pcm_audio(video, audio, 44100)

    def test_empty_audio_rejected(self, tmp_path):
        video = make_video_mp4(tmp_path / "v.mp4")
        from storyreel.errors import ContractViolationError
        with pytest.raises(ContractViolationError):
            mp4.mux_pcm_audio(video, np.zeros(0), 44100)
