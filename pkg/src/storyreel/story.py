"""Story and scene-description generation.

Builds the two prompt templates (story, per-sentence picture description),
segments the returned story into sentences with character spans, and augments
image prompts with the configured style suffix.
"""

import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .errors import ContractViolationError, EmptyStoryError, InvalidRequestError

STORY_TEMPLATE = "The following is a {genre} about a {x} and a {y}:"
CHILDREN_GENRE = "children's story"
DESCRIPTION_TEMPLATE = ("The story has pictures accompanying it. From the sentence "
                        "{sentence}, here is what the picture looks like:")

DEFAULT_SUFFIX_TERMS = ("extremely detailed", "textured", "high detail", "4k")

# Titles like "Mr." never end a sentence even when followed by whitespace.
NON_TERMINAL_ABBREVIATIONS = ("Mr.", "Mrs.", "Dr.", "Ms.", "St.")

SENTENCE_TERMINATORS = ".!?"


@dataclass(frozen=True)
class StoryRequest:
    subject_x: str
    subject_y: str
    seed: int
    genre_preset: str = "children"  # "children" or "custom"
    custom_prefix: str | None = None  # genre text for the custom preset

    def __post_init__(self):
        for name, value in (("subject_x", self.subject_x), ("subject_y", self.subject_y)):
            if not value or not value.strip():
                raise InvalidRequestError(f"{name} must be a nonempty noun phrase")
        if self.seed < 0:
            raise InvalidRequestError("seed must be a non-negative integer")
        if self.genre_preset not in ("children", "custom"):
            raise InvalidRequestError(f"unknown genre preset {self.genre_preset!r}")
        if self.genre_preset == "custom" and not (self.custom_prefix or "").strip():
            raise InvalidRequestError("custom preset requires a prefix text")

    def to_dict(self) -> dict:
        return {"subject_x": self.subject_x, "subject_y": self.subject_y,
                "seed": self.seed, "genre_preset": self.genre_preset,
                "custom_prefix": self.custom_prefix}

    @classmethod
    def from_dict(cls, d: dict) -> "StoryRequest":
        return cls(d["subject_x"], d["subject_y"], d["seed"],
                   d.get("genre_preset", "children"), d.get("custom_prefix"))


@dataclass(frozen=True)
class Sentence:
    index: int
    text: str
    char_span: tuple[int, int]

    def to_dict(self) -> dict:
        return {"index": self.index, "text": self.text,
                "char_span": list(self.char_span)}

    @classmethod
    def from_dict(cls, d: dict) -> "Sentence":
        return cls(d["index"], d["text"], tuple(d["char_span"]))


@dataclass(frozen=True)
class Story:
    full_text: str
    sentences: tuple[Sentence, ...]
    prompt_used: str

    def to_dict(self) -> dict:
        return {"full_text": self.full_text, "prompt_used": self.prompt_used,
                "sentences": [s.to_dict() for s in self.sentences]}

    @classmethod
    def from_dict(cls, d: dict) -> "Story":
        return cls(d["full_text"],
                   tuple(Sentence.from_dict(s) for s in d["sentences"]),
                   d["prompt_used"])


@dataclass(frozen=True)
class SceneDescription:
    sentence_index: int
    description_text: str
    augmented_prompt: str

    def to_dict(self) -> dict:
        return {"sentence_index": self.sentence_index,
                "description_text": self.description_text,
                "augmented_prompt": self.augmented_prompt}

    @classmethod
    def from_dict(cls, d: dict) -> "SceneDescription":
        return cls(d["sentence_index"], d["description_text"], d["augmented_prompt"])


@dataclass(frozen=True)
class StyleConfig:
    suffix_terms: tuple[str, ...] = DEFAULT_SUFFIX_TERMS
    theme: str | None = None

    def to_dict(self) -> dict:
        return {"suffix_terms": list(self.suffix_terms), "theme": self.theme}

    @classmethod
    def from_dict(cls, d: dict) -> "StyleConfig":
        return cls(tuple(d.get("suffix_terms", DEFAULT_SUFFIX_TERMS)), d.get("theme"))


def build_story_prompt(req: StoryRequest) -> str:
    """The opening prompt handed to the text backend."""
    genre = CHILDREN_GENRE if req.genre_preset == "children" else req.custom_prefix.strip()
    return STORY_TEMPLATE.format(genre=genre, x=req.subject_x, y=req.subject_y)


def normalize_whitespace(text: str) -> str:
    return " ".join(text.split())


def segment_sentences(full_text: str) -> list[Sentence]:
    """Split text into sentences on {., !, ?} followed by whitespace or end.

    The terminator stays with its sentence. Title abbreviations (Mr., Mrs.,
    Dr., ...) do not split; decimal points never match because they are not
    followed by whitespace. Text with no terminator is one sentence.
    """
    if not full_text or not full_text.strip():
        raise ContractViolationError("cannot segment empty text")
    breaks: list[int] = []  # index just past each terminator
    for i, ch in enumerate(full_text):
        if ch not in SENTENCE_TERMINATORS:
            continue
        at_end = i + 1 >= len(full_text)
        if not at_end and not full_text[i + 1].isspace():
            continue
        if ch == "." and _ends_with_abbreviation(full_text, i):
            continue
        breaks.append(i + 1)
    if not breaks or breaks[-1] < len(full_text.rstrip()):
        breaks.append(len(full_text))

    sentences: list[Sentence] = []
    prev = 0
    for brk in breaks:
        chunk = full_text[prev:brk]
        stripped = chunk.strip()
        if stripped:
            start = prev + (len(chunk) - len(chunk.lstrip()))
            sentences.append(Sentence(index=len(sentences), text=stripped,
                                      char_span=(start, start + len(stripped))))
        prev = brk
    if not sentences:
        raise ContractViolationError("text contains no sentences")
    return sentences


def _ends_with_abbreviation(text: str, dot_index: int) -> bool:
    head = text[:dot_index + 1]
    return any(head.endswith(abbr) for abbr in NON_TERMINAL_ABBREVIATIONS)


def strip_title_line(completion: str) -> str:
    """Drop a leading title line ending in ':' that some backends prepend."""
    text = completion.strip()
    first_newline = text.find("\n")
    if first_newline > 0 and text[:first_newline].rstrip().endswith(":"):
        return text[first_newline + 1:].strip()
    return text


def build_description_prompt(story: Story, sentence: Sentence) -> str:
    """Re-prompt: the whole story, then the picture-description template."""
    if not _sentence_in_story(story, sentence):
        raise ContractViolationError(
            f"sentence {sentence.index} does not belong to this story")
    return story.full_text + "\n" + DESCRIPTION_TEMPLATE.format(sentence=sentence.text)


def _sentence_in_story(story: Story, sentence: Sentence) -> bool:
    return (0 <= sentence.index < len(story.sentences)
            and story.sentences[sentence.index].text == sentence.text)


def augment_image_prompt(description: str, style: StyleConfig) -> str:
    """Append the style suffix terms (and theme, last) to a description."""
    if not description:
        raise ContractViolationError("description must be nonempty")
    terms = list(style.suffix_terms)
    if style.theme:
        terms.append(style.theme)
    if not terms:
        return description
    return description + ", " + ", ".join(terms)


def generate_story(req: StoryRequest, gateway, max_tokens: int = 1024) -> Story:
    """Run the story prompt through the text backend and segment the result."""
    prompt = build_story_prompt(req)
    completion = gateway.complete_text(prompt, {"max_tokens": max_tokens}, seed=req.seed)
    full_text = strip_title_line(completion)
    if not full_text:
        raise EmptyStoryError("text backend returned an empty story")
    return Story(full_text=full_text,
                 sentences=tuple(segment_sentences(full_text)),
                 prompt_used=prompt)


def generate_scene_description(story: Story, sentence: Sentence, gateway,
                               style: StyleConfig, seed: int,
                               max_tokens: int = 256) -> SceneDescription:
    """One picture description for one sentence."""
    prompt = build_description_prompt(story, sentence)
    completion = gateway.complete_text(prompt, {"max_tokens": max_tokens}, seed=seed).strip()
    if not completion:
        raise EmptyStoryError(
            f"text backend returned an empty description for sentence {sentence.index}")
    return SceneDescription(
        sentence_index=sentence.index,
        description_text=completion,
        augmented_prompt=augment_image_prompt(completion, style),
    )


def generate_all_descriptions(story: Story, gateway, style: StyleConfig, seed: int,
                              parallelism: int = 4,
                              max_tokens: int = 256) -> list[SceneDescription]:
    """Descriptions for every sentence, ordered by sentence index.

    Runs with bounded parallelism; completion order does not matter because
    results are collected positionally.
    """
    def one(sentence: Sentence) -> SceneDescription:
        return generate_scene_description(story, sentence, gateway, style, seed,
                                          max_tokens=max_tokens)

    with ThreadPoolExecutor(max_workers=max(1, parallelism)) as pool:
        return list(pool.map(one, story.sentences))
