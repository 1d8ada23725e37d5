import threading
import time

import numpy as np
import pytest

from storyreel import audio_io
from storyreel.backends import Gateway
from storyreel.backends.endpoints import BackendEndpoint, GenerationRequest
from storyreel.backends.mock import mock_generate_music, mock_synthesize_speech
from storyreel.canonical import hash_request
from storyreel.errors import (BackendTimeoutError, ContractViolationError,
                              MalformedResponseError, TransientBackendError)


@pytest.fixture
def gateway(project, mock_config):
    return Gateway(mock_config.endpoints, project)


class TestRequestHash:
    def test_stable_across_instances(self):
        r1 = GenerationRequest("text", {"prompt": "p", "seed": 1}, "m-1")
        r2 = GenerationRequest("text", {"seed": 1, "prompt": "p"}, "m-1")
        assert r1.request_hash == r2.request_hash

    def test_fingerprint_changes_key(self):
        payload = {"prompt": "p", "seed": 1}
        assert hash_request("text", payload, "model-a") != \
            hash_request("text", payload, "model-b")

    def test_payload_changes_key(self):
        assert hash_request("text", {"prompt": "p", "seed": 1}, "m") != \
            hash_request("text", {"prompt": "p", "seed": 2}, "m")


class TestTextMock:
    def test_story_prompt_gets_eight_sentences(self, gateway):
        out = gateway.complete_text(
            "The following is a children's story about a boy and a horse:", seed=42)
        from storyreel.story import segment_sentences
        assert len(segment_sentences(out)) == 8
        assert "boy" in out and "horse" in out

    def test_description_prompt_rule(self, gateway):
        prompt = ("Story text here.\nThe story has pictures accompanying it. "
                  "From the sentence A boy waved., here is what the picture looks like:")
        assert gateway.complete_text(prompt, seed=42) == "illustration of: A boy waved."

    def test_cache_hit_no_second_invocation(self, gateway):
        gateway.complete_text("hello prompt", seed=1)
        gateway.snapshot_counts(reset=True)
        gateway.complete_text("hello prompt", seed=1)
        assert gateway.snapshot_counts().get("text", 0) == 0


class TestRetries:
    def _flaky(self, failures, exc=TransientBackendError):
        calls = {"n": 0}

        def adapter(payload):
            calls["n"] += 1
            if calls["n"] <= failures:
                raise exc("injected failure")
            return "ok"

        return adapter, calls

    def _gw(self, project, mock_config, adapter, max_retries=3):
        endpoints = dict(mock_config.endpoints)
        endpoints["text"] = BackendEndpoint(kind="text", transport="mock",
                                            max_retries=max_retries, backoff_base_ms=0)
        return Gateway(endpoints, project, adapters={"text": adapter})

    def test_two_failures_then_success(self, project, mock_config):
        adapter, calls = self._flaky(2)
        gw = self._gw(project, mock_config, adapter, max_retries=3)
        assert gw.complete_text("p", seed=0) == "ok"
        assert calls["n"] == 3
        rhash = GenerationRequest(
            "text", {"prompt": "p", "seed": 0},
            gw.endpoint("text").fingerprint).request_hash
        assert gw.attempts[rhash] == 3

    def test_timeout_on_all_attempts(self, project, mock_config):
        adapter, calls = self._flaky(99, exc=BackendTimeoutError)
        gw = self._gw(project, mock_config, adapter, max_retries=2)
        with pytest.raises(BackendTimeoutError) as err:
            gw.complete_text("p", seed=0)
        assert calls["n"] == 3  # max_retries + 1
        assert err.value.request_hash is not None

    def test_auth_error_not_retried(self, project, mock_config):
        from storyreel.errors import BackendAuthError
        adapter, calls = self._flaky(99, exc=BackendAuthError)
        gw = self._gw(project, mock_config, adapter, max_retries=3)
        with pytest.raises(BackendAuthError):
            gw.complete_text("p", seed=0)
        assert calls["n"] == 1

    def test_backoff_non_decreasing(self, project, mock_config, monkeypatch):
        sleeps = []
        monkeypatch.setattr(time, "sleep", lambda s: sleeps.append(s))
        adapter, _ = self._flaky(99)
        endpoints = dict(mock_config.endpoints)
        endpoints["text"] = BackendEndpoint(kind="text", transport="mock",
                                            max_retries=3, backoff_base_ms=100)
        gw = Gateway(endpoints, project, adapters={"text": adapter})
        with pytest.raises(TransientBackendError):
            gw.complete_text("p", seed=0)
        assert sleeps == sorted(sleeps) and len(sleeps) == 3

    def test_malformed_response_not_retried(self, project, mock_config):
        adapter, calls = self._flaky(99, exc=MalformedResponseError)
        gw = self._gw(project, mock_config, adapter)
        with pytest.raises(MalformedResponseError):
            gw.complete_text("p", seed=0)
        assert calls["n"] == 1


class TestImageMock:
    def test_dimensions_and_decode(self, gateway, project):
        asset = gateway.generate_image("a horse", seed=1, width=512, height=512)
        assert (asset.width, asset.height) == (512, 512)
        from storyreel.assets import probe_image_bytes
        assert probe_image_bytes(project.read_asset(asset.path)) == (512, 512)

    def test_invalid_size_rejected(self, gateway):
        with pytest.raises(ContractViolationError):
            gateway.generate_image("p", seed=1, width=300, height=512)

    def test_same_prompt_seed_identical_one_call(self, gateway):
        a1 = gateway.generate_image("p", seed=5, width=256, height=256)
        gateway.snapshot_counts(reset=True)
        a2 = gateway.generate_image("p", seed=5, width=256, height=256)
        assert a1.content_hash == a2.content_hash
        assert gateway.snapshot_counts().get("image", 0) == 0

    def test_hundred_seeds_hundred_distinct_assets(self, gateway):
        hashes = {gateway.generate_image("one prompt", seed=s, width=256, height=256).content_hash
                  for s in range(100)}
        assert len(hashes) == 100


class TestTtsMock:
    def test_duration_rule_scale_1(self, gateway):
        asset = gateway.synthesize_speech("Hello.", "vctk", 1.0)
        assert asset.sample_rate == 22050
        assert asset.duration == pytest.approx(0.360, abs=0.001)

    def test_duration_rule_scale_2_1(self, gateway):
        asset = gateway.synthesize_speech("Hello.", "vctk", 2.1)
        assert asset.duration == pytest.approx(0.756, abs=0.001)

    def test_length_scale_bounds(self, gateway):
        with pytest.raises(ContractViolationError):
            gateway.synthesize_speech("x", "vctk", 0.4)
        with pytest.raises(ContractViolationError):
            gateway.synthesize_speech("x", "vctk", 3.5)

    def test_mock_is_mono(self, gateway):
        assert gateway.synthesize_speech("Hello.", "vctk", 1.0).channels == 1


class TestMusicMock:
    def test_exact_duration_and_determinism(self, gateway):
        a1 = gateway.generate_music("raffi", 60.0, seed=1)
        assert a1.duration == pytest.approx(60.0, abs=0.001)
        gateway.snapshot_counts(reset=True)
        a2 = gateway.generate_music("raffi", 60.0, seed=1)
        assert a2.content_hash == a1.content_hash
        assert gateway.snapshot_counts().get("music", 0) == 0

    def test_presets_differ(self):
        w1 = mock_generate_music({"preset": "raffi", "target_duration": 10.0, "seed": 0})
        w2 = mock_generate_music({"preset": "wiggles", "target_duration": 10.0, "seed": 0})
        assert w1 != w2

    def test_duration_bounds(self, gateway):
        with pytest.raises(ContractViolationError):
            gateway.generate_music("raffi", 5.0)
        with pytest.raises(ContractViolationError):
            gateway.generate_music("raffi", 601.0)


class TestSeparationMock:
    def test_vocals_silent_instruments_passthrough(self, gateway, project):
        music = gateway.generate_music("raffi", 12.0, seed=3)
        vocals, instruments = gateway.separate_vocals(music)
        assert abs(vocals.duration - music.duration) <= 0.05
        assert abs(instruments.duration - music.duration) <= 0.05
        v, _ = audio_io.read_wav_bytes(project.read_asset(vocals.path))
        assert np.abs(v).max() == 0.0
        assert instruments.content_hash == music.content_hash


class TestSingleFlight:
    def test_concurrent_identical_requests_one_call(self, project, mock_config):
        started = threading.Barrier(8)
        calls = {"n": 0}

        def slow_adapter(payload):
            calls["n"] += 1
            time.sleep(0.1)
            return "slow result"

        gw = Gateway(mock_config.endpoints, project, adapters={"text": slow_adapter})

        results = []

        def worker():
            started.wait()
            results.append(gw.complete_text("same prompt", seed=9))

        threads = [threading.Thread(target=worker) for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert calls["n"] == 1
        assert results == ["slow result"] * 8


class TestMockDuration:
    def test_mock_tts_wav_shape(self):
        wav = mock_synthesize_speech({"text": "Hello.", "voice": "v", "length_scale": 1.0})
        samples, rate = audio_io.read_wav_bytes(wav)
        assert rate == 22050
        assert len(samples) == round(0.360 * 22050)
