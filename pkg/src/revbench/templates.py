"""Prompt template registry backed by the shipped text assets.

Templates carry literal JSON braces, so rendering is plain substring
replacement of declared {name} placeholders, never str.format. The asset
manifest pins a sha256 per file; verify_assets() reports any drift.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

from .errors import TemplateError

_PROMPT_DIR = "prompts"


def asset_text(name: str) -> str:
    return resources.files("revbench").joinpath(_PROMPT_DIR, name).read_text(encoding="utf-8")


def asset_bytes(name: str) -> bytes:
    return resources.files("revbench").joinpath(_PROMPT_DIR, name).read_bytes()


@dataclass(frozen=True)
class Decoding:
    temperature: float = 0.0
    max_tokens: int = 4096


@dataclass(frozen=True)
class PromptPair:
    template_id: str
    system_text: str
    user_text: str
    decoding: Decoding = field(default_factory=Decoding)


@dataclass(frozen=True)
class _Template:
    system_file: str
    user_file: str | None
    placeholders: tuple[str, ...]


# template id -> (system asset, user asset, user-side placeholders)
_REGISTRY: dict[str, _Template] = {
    "coverage": _Template(
        "coverage_judge_system.txt",
        "coverage_judge_user.txt",
        ("question", "report", "criterion"),
    ),
    "presentation": _Template(
        "presentation_judge_system.txt",
        "presentation_judge_user.txt",
        ("question", "report", "criterion"),
    ),
    "claim_extraction": _Template(
        "claim_extraction_system.txt",
        "claim_extraction_user.txt",
        ("report", "highlighted_section"),
    ),
    "support": _Template(
        "support_judge_system.txt",
        "support_judge_user.txt",
        ("url_content", "claim"),
    ),
    "summarizer": _Template(
        "summarizer_system.txt",
        "summarizer_user.txt",
        ("content", "claims"),
    ),
    "pairwise_format": _Template(
        "pairwise_format_judge_system.txt",
        "pairwise_format_judge_user.txt",
        ("question", "report", "revised_report", "feedback"),
    ),
    "content_feedback_1": _Template(
        "content_feedback_k1_system.txt",
        "content_feedback_k1_user.txt",
        ("question", "criterion", "coverage_status", "weight", "justification"),
    ),
    "content_feedback_k": _Template(
        "content_feedback_kn_system.txt",
        "content_feedback_kn_user.txt",
        ("question", "rules"),
    ),
    "format_feedback": _Template(
        "format_feedback_system.txt",
        "format_feedback_user.txt",
        ("question", "report", "seeds"),
    ),
    "pe_refiner": _Template(
        "pe_refiner_system.txt",
        "pe_refiner_user.txt",
        ("question", "report", "feedback"),
    ),
    "reviser": _Template(
        "reviser_system.txt",
        "reviser_user.txt",
        ("question", "report", "feedback"),
    ),
}

# system-side placeholders, for the few templates that have them
_SYSTEM_PLACEHOLDERS: dict[str, tuple[str, ...]] = {"reviser": ("max_tool_calls",)}


def template_ids() -> tuple[str, ...]:
    return tuple(sorted(_REGISTRY))


def _substitute(text: str, names: tuple[str, ...], bindings: dict[str, str], tid: str) -> str:
    for name in names:
        token = "{" + name + "}"
        if name not in bindings:
            raise TemplateError(f"template {tid!r}: missing binding for {name!r}")
        if token not in text:
            raise TemplateError(f"template {tid!r}: placeholder {token} not found")
        text = text.replace(token, str(bindings[name]))
    return text


def render_prompt(
    template_id: str, bindings: dict[str, str], decoding: Decoding | None = None
) -> PromptPair:
    """Byte-exact substitution of declared placeholders into the shipped texts."""
    tmpl = _REGISTRY.get(template_id)
    if tmpl is None:
        raise TemplateError(f"unknown template id {template_id!r}")
    system = asset_text(tmpl.system_file)
    sys_names = _SYSTEM_PLACEHOLDERS.get(template_id, ())
    if sys_names:
        system = _substitute(system, sys_names, bindings, template_id)
    user = ""
    if tmpl.user_file is not None:
        user = _substitute(asset_text(tmpl.user_file), tmpl.placeholders, bindings, template_id)
    return PromptPair(template_id, system, user, decoding or Decoding())


@lru_cache(maxsize=1)
def negative_weight_reminder() -> str:
    return asset_text("negative_weight_reminder.txt")


@lru_cache(maxsize=1)
def reflect_feedback_text() -> str:
    return asset_text("reflect_feedback.txt")


@lru_cache(maxsize=1)
def pe_constraint_suffix() -> str:
    return asset_text("pe_constraint_suffix.txt")


@lru_cache(maxsize=1)
def reviser_forced_final() -> str:
    return asset_text("reviser_forced_final.txt")


@dataclass(frozen=True)
class PresentationQuestion:
    index: int
    text: str
    na_allowed: bool


@lru_cache(maxsize=1)
def presentation_questions() -> tuple[PresentationQuestion, ...]:
    raw = json.loads(asset_text("presentation_questions.json"))
    bank = tuple(PresentationQuestion(r["index"], r["text"], r["na_allowed"]) for r in raw)
    assert len(bank) == 10 and [q.index for q in bank] == list(range(1, 11))
    return bank


@dataclass(frozen=True)
class FormatSeed:
    id: int
    text: str


@lru_cache(maxsize=1)
def format_seed_bank() -> tuple[FormatSeed, ...]:
    raw = json.loads(asset_text("format_seed_feedback.json"))
    return tuple(FormatSeed(r["id"], r["text"]) for r in raw)


def load_manifest() -> dict[str, dict]:
    return json.loads(asset_text("manifest.json"))


def verify_assets() -> list[str]:
    """Return a list of mismatch descriptions; empty means all hashes check out."""
    problems: list[str] = []
    manifest = load_manifest()
    for name, meta in manifest.items():
        try:
            digest = hashlib.sha256(asset_bytes(name)).hexdigest()
        except FileNotFoundError:
            problems.append(f"asset {name} listed in manifest but missing")
            continue
        if digest != meta["sha256"]:
            problems.append(f"asset {name} hash mismatch (expected {meta['sha256'][:12]}…)")
    listed = set(manifest)
    present = {
        f.name
        for f in resources.files("revbench").joinpath(_PROMPT_DIR).iterdir()
        if f.name.endswith((".txt", ".json")) and f.name != "manifest.json"
    }
    for name in sorted(present - listed):
        problems.append(f"asset {name} present but not in manifest")
    return problems


def asset_hashes() -> dict[str, str]:
    return {name: meta["sha256"] for name, meta in load_manifest().items()}
