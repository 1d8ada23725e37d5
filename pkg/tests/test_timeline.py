import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from storyreel import audio_io
from storyreel.assets import AudioAsset
from storyreel.errors import ContractViolationError
from storyreel.timeline import (MIX_RATE, MixConfig, SpeechSegment, duck_envelope,
                                fit_music, layout_speech, mix_to_wav, render_mix)


def clip(duration: float, rate: int = 22050) -> AudioAsset:
    n = round(duration * rate)
    return AudioAsset("x" * 64, "assets/xx/fake.wav", rate, 1, n / rate)


class TestLayout:
    def test_single_segment(self):
        segs, total = layout_speech([clip(2.0)], MixConfig())
        assert segs[0].start == 0.5
        assert total == pytest.approx(3.5)

    def test_two_segments(self):
        segs, total = layout_speech([clip(2.0), clip(3.0)], MixConfig())
        assert [s.start for s in segs] == pytest.approx([0.5, 3.2])
        assert total == pytest.approx(7.2)

    def test_degenerate_config_back_to_back(self):
        cfg = MixConfig(inter_sentence_pause=0.0, lead_in=0.0, tail=0.0)
        segs, total = layout_speech([clip(1.0), clip(2.0), clip(0.5)], cfg)
        assert [s.start for s in segs] == pytest.approx([0.0, 1.0, 3.0])
        assert total == pytest.approx(3.5)

    def test_monotone_starts_exact_gaps(self):
        cfg = MixConfig()
        segs, _ = layout_speech([clip(d) for d in (1.0, 2.5, 0.7, 3.3)], cfg)
        for a, b in zip(segs, segs[1:]):
            assert b.start > a.start
            assert b.start - a.end == pytest.approx(cfg.inter_sentence_pause)

    def test_empty_rejected(self):
        with pytest.raises(ContractViolationError):
            layout_speech([], MixConfig())


class TestFitMusic:
    rate = 22050

    def _tone(self, seconds):
        t = np.arange(round(seconds * self.rate)) / self.rate
        return 0.5 * np.sin(2 * np.pi * 220 * t)

    def test_trim_to_shorter_video(self):
        out = fit_music(self._tone(60), self.rate, 45.0, MixConfig())
        assert len(out) == round(45.0 * self.rate)
        assert out[-1] == pytest.approx(0.0, abs=1e-9)  # fade ends at zero

    def test_loop_to_longer_video(self):
        music = self._tone(60)
        out = fit_music(music, self.rate, 150.0, MixConfig(fade_out=0.0))
        assert len(out) == round(150.0 * self.rate)
        n = len(music)
        np.testing.assert_allclose(out[n:2 * n], music)  # second loop verbatim

    def test_equal_length_passthrough_plus_fade(self):
        music = self._tone(30)
        out = fit_music(music, self.rate, 30.0, MixConfig(fade_out=2.0))
        n_fade = round(2.0 * self.rate)
        np.testing.assert_allclose(out[:-n_fade], music[:-n_fade])

    def test_fade_is_linear(self):
        music = np.ones(self.rate * 10)
        out = fit_music(music, self.rate, 10.0, MixConfig(fade_out=2.0))
        n_fade = round(2.0 * self.rate)
        expected = np.linspace(1.0, 0.0, n_fade)
        np.testing.assert_allclose(out[-n_fade:], expected)


class TestDuckEnvelope:
    def test_levels_outside_and_inside(self):
        cfg = MixConfig()
        segs = [SpeechSegment(0, clip(2.0), 3.0)]
        env = duck_envelope(segs, 10.0, cfg)
        bed = 10 ** (-12 / 20)
        ducked = 10 ** (-20 / 20)
        assert bed == pytest.approx(0.2512, abs=1e-4)
        assert ducked == pytest.approx(0.1, abs=1e-12)
        assert env[MIX_RATE * 1] == pytest.approx(bed)       # before attack
        assert env[MIX_RATE * 4] == pytest.approx(ducked)    # inside span
        assert env[MIX_RATE * 8] == pytest.approx(bed)       # after release

    def test_no_speech_constant(self):
        env = duck_envelope([], 5.0, MixConfig())
        assert len(env) == round(5.0 * MIX_RATE)
        assert np.all(env == pytest.approx(10 ** (-12 / 20)))

    def test_ramps_monotone_at_boundaries(self):
        cfg = MixConfig(duck_attack_release_ms=250)
        segs = [SpeechSegment(0, clip(1.0), 2.0)]
        env = duck_envelope(segs, 6.0, cfg)
        ramp_n = round(0.25 * MIX_RATE)
        attack = env[2 * MIX_RATE - ramp_n:2 * MIX_RATE]
        release = env[3 * MIX_RATE:3 * MIX_RATE + ramp_n]
        assert np.all(np.diff(attack) <= 1e-12)
        assert np.all(np.diff(release) >= -1e-12)

    def test_envelope_in_unit_interval(self):
        segs = [SpeechSegment(i, clip(0.8), 0.2 + i * 1.1) for i in range(4)]
        env = duck_envelope(segs, 6.0, MixConfig())
        assert np.all(env > 0.0) and np.all(env <= 1.0)


class TestMix:
    def _music_tone(self, seconds, amp=0.5, rate=MIX_RATE):
        t = np.arange(round(seconds * rate)) / rate
        return amp * np.sin(2 * np.pi * 330 * t)

    def test_silent_music_identity_for_speech(self):
        cfg = MixConfig()
        rate = 22050
        speech = 0.4 * np.sin(2 * np.pi * 440 * np.arange(rate) / rate)  # 1s
        asset = AudioAsset("h" * 64, "p.wav", rate, 1, 1.0)
        segs, total = layout_speech([asset], cfg)
        music = np.zeros(round(total * rate))
        env = duck_envelope(segs, total, cfg)
        out = render_mix(segs, {0: (speech, rate)}, music, rate, env, total, cfg)
        start = round(0.5 * MIX_RATE)
        resampled = audio_io.resample_linear(speech, rate, MIX_RATE)
        np.testing.assert_allclose(out[start:start + len(resampled)], resampled,
                                   atol=1e-9)
        assert np.abs(out[:start]).max() == 0.0

    def test_full_scale_sum_clamped(self):
        cfg = MixConfig(music_gain_db=0.0, duck_extra_db=0.0,
                        lead_in=0.0, tail=0.0, fade_out=0.0)
        rate = MIX_RATE
        ones = np.ones(rate)  # 1s of +1.0 "speech"
        asset = AudioAsset("h" * 64, "p.wav", rate, 1, 1.0)
        segs, total = layout_speech([asset], cfg)
        music = np.ones(round(total * rate))
        env = duck_envelope(segs, total, cfg)
        out = render_mix(segs, {0: (ones, rate)}, music, rate, env, total, cfg)
        assert out.max() <= 1.0 and out.min() >= -1.0
        assert out.max() == 1.0  # actually clamped, not just small

    def test_music_only_rms_matches_envelope(self):
        # Independent oracle: for a sine of amplitude A under constant gain g,
        # RMS = g * A / sqrt(2).
        cfg = MixConfig(lead_in=0.0, tail=0.0, fade_out=0.0)
        total = 4.0
        music = self._music_tone(total, amp=0.8)
        env = duck_envelope([], total, cfg)
        out = render_mix([], {}, music, MIX_RATE, env, total, cfg)
        g = 10 ** (cfg.music_gain_db / 20)
        expected_rms = g * 0.8 / np.sqrt(2)
        measured = np.sqrt(np.mean(out ** 2))
        assert measured == pytest.approx(expected_rms, rel=0.01)

    def test_sample_count_exact(self):
        cfg = MixConfig()
        for total in (3.5, 7.2, 10.001, 59.99):
            music = np.zeros(round(total * MIX_RATE))
            env = duck_envelope([], total, cfg)
            out = render_mix([], {}, music, MIX_RATE, env, total, cfg)
            assert len(out) == round(total * MIX_RATE)

    def test_segment_beyond_total_rejected(self):
        cfg = MixConfig(lead_in=0.0, tail=0.0)
        asset = AudioAsset("h" * 64, "p.wav", MIX_RATE, 1, 5.0)
        seg = SpeechSegment(0, asset, 2.0)  # ends at 7.0 > total 3.0
        music = np.zeros(round(3.0 * MIX_RATE))
        env = duck_envelope([], 3.0, cfg)
        with pytest.raises(ContractViolationError):
            render_mix([seg], {0: (np.zeros(5 * MIX_RATE), MIX_RATE)},
                       music, MIX_RATE, env, 3.0, cfg)

    @settings(max_examples=30, deadline=None)
    @given(amp_speech=st.floats(0.0, 1.0), amp_music=st.floats(0.0, 1.0),
           gain_db=st.floats(-24.0, 0.0))
    def test_no_clipping_property(self, amp_speech, amp_music, gain_db):
        cfg = MixConfig(music_gain_db=gain_db, duck_extra_db=0.0,
                        lead_in=0.0, tail=0.0, fade_out=0.0)
        rate = MIX_RATE
        speech = amp_speech * np.sign(np.sin(np.arange(rate) * 0.3))  # square, 1s
        asset = AudioAsset("h" * 64, "p.wav", rate, 1, 1.0)
        segs, total = layout_speech([asset], cfg)
        music = amp_music * np.sign(np.sin(np.arange(round(total * rate)) * 0.11))
        env = duck_envelope(segs, total, cfg)
        out = render_mix(segs, {0: (speech, rate)}, music, rate, env, total, cfg)
        assert np.all(out <= 1.0) and np.all(out >= -1.0)

    def test_duck_depth_on_constant_tone(self):
        # Constant-amplitude music, silent speech content: the RMS ratio
        # between inside-span and outside-span regions is duck_extra_db.
        cfg = MixConfig(lead_in=1.0, tail=1.0, fade_out=0.0,
                        inter_sentence_pause=1.0)
        rate = MIX_RATE
        speech_clip = np.zeros(rate * 2)  # 2s silent narration
        asset = AudioAsset("h" * 64, "p.wav", rate, 1, 2.0)
        segs, total = layout_speech([asset, asset], cfg)
        music = self._music_tone(total, amp=0.7)
        env = duck_envelope(segs, total, cfg)
        out = render_mix(segs, {0: (speech_clip, rate), 1: (speech_clip, rate)},
                         music, rate, env, total, cfg)
        ramp = round(cfg.duck_attack_release_ms / 1000 * rate)

        def rms(lo, hi):
            return np.sqrt(np.mean(out[lo:hi] ** 2))

        margin = ramp + round(0.05 * rate)
        inside = rms(round(segs[0].start * rate) + round(0.05 * rate),
                     round(segs[0].end * rate) - round(0.05 * rate))
        outside = rms(round(segs[0].end * rate) + margin,
                      round(segs[1].start * rate) - margin)
        measured_db = 20 * np.log10(inside / outside)
        assert measured_db == pytest.approx(cfg.duck_extra_db, abs=0.5)


class TestWavRoundTrip:
    def test_mix_to_wav_mono(self):
        cfg = MixConfig(channels=1)
        data = mix_to_wav(np.linspace(-1, 1, 1000), cfg)
        samples, rate = audio_io.read_wav_bytes(data)
        assert rate == MIX_RATE
        assert samples.ndim == 1
        np.testing.assert_allclose(samples, np.linspace(-1, 1, 1000), atol=1 / 32767)

    def test_mix_to_wav_stereo(self):
        cfg = MixConfig(channels=2)
        data = mix_to_wav(np.zeros(100), cfg)
        _, _, dur = __import__("storyreel.assets", fromlist=["probe_wav_bytes"]).probe_wav_bytes(data)
        samples, _ = audio_io.read_wav_bytes(data)
        assert samples.shape == (100, 2)
