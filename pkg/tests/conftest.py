import dataclasses

import pytest

from storyreel.config import PipelineConfig, resolve_config
from storyreel.store import ProjectStore
from storyreel.story import StoryRequest


@pytest.fixture
def mock_config() -> PipelineConfig:
    return resolve_config(None, backends="mock")


@pytest.fixture
def fast_config(mock_config) -> PipelineConfig:
    """Mock config with a small frame size and low fps so render-heavy tests
    stay quick; contracts under test are size-independent."""
    return dataclasses.replace(
        mock_config,
        compose=dataclasses.replace(mock_config.compose, frame_width=320,
                                    frame_height=180, fps=10),
    )


@pytest.fixture
def request_boy_horse() -> StoryRequest:
    return StoryRequest("boy", "horse", seed=42)


@pytest.fixture
def project(tmp_path, fast_config, request_boy_horse) -> ProjectStore:
    fingerprints = {k: ep.fingerprint for k, ep in fast_config.endpoints.items()}
    return ProjectStore.init_project(
        str(tmp_path / "proj"), request_boy_horse.to_dict(),
        fast_config.to_dict(), fingerprints)
