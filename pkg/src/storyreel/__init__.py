"""storyreel: two nouns in, a narrated, illustrated, music-backed story video out."""

__version__ = "0.1.0"

from .camera import CameraKeyframe, CameraPath, crop_rect, default_camera_path, interpolate_camera
from .story import (SceneDescription, Sentence, Story, StoryRequest, StyleConfig,
                    augment_image_prompt, build_description_prompt, build_story_prompt,
                    segment_sentences)
from .timeline import MixConfig, SpeechSegment, duck_envelope, fit_music, layout_speech

__all__ = [
    "CameraKeyframe", "CameraPath", "crop_rect", "default_camera_path",
    "interpolate_camera", "SceneDescription", "Sentence", "Story", "StoryRequest",
    "StyleConfig", "augment_image_prompt", "build_description_prompt",
    "build_story_prompt", "segment_sentences", "MixConfig", "SpeechSegment",
    "duck_envelope", "fit_music", "layout_speech", "__version__",
]
