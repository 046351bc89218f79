"""Agent adapters: subprocess and HTTP wire contract, plus the synthetic kind.

Wire contract (bit-exact): the adapter sends one JSON object
    {"question": str, "history": [{"report": str, "feedback": str}, ...]}
as a single stdin line (subprocess) or POST body (http), and reads back one
JSON object {"report": str}. Trailing noise after the subprocess's JSON
object is tolerated with a warning.
"""

from __future__ import annotations

import json
import logging
import shlex
import subprocess
from dataclasses import dataclass

import requests

from .errors import AdapterError, ConfigError

logger = logging.getLogger(__name__)

SUBPROCESS = "subprocess"
HTTP = "http"
SYNTHETIC = "synthetic"


@dataclass(frozen=True)
class AgentAdapter:
    kind: str
    locator: str
    timeout_s: float = 600.0
    agent_id: str = ""

    def __post_init__(self):
        if self.kind not in (SUBPROCESS, HTTP, SYNTHETIC):
            raise ConfigError(f"unknown adapter kind {self.kind!r}")
        if not self.agent_id:
            object.__setattr__(self, "agent_id", f"{self.kind}:{self.locator}")


def parse_agent_spec(spec: str, timeout_s: float = 600.0, agent_id: str = "") -> AgentAdapter:
    """Parse a CLI --agent value of the form kind:locator."""
    kind, _, locator = spec.partition(":")
    if kind not in (SUBPROCESS, HTTP, SYNTHETIC):
        raise ConfigError(f"--agent must start with subprocess:, http:, or synthetic: (got {spec!r})")
    return AgentAdapter(kind=kind, locator=locator, timeout_s=timeout_s, agent_id=agent_id)


def transcript_payload(question: str, history: list[tuple[str, str]]) -> dict:
    return {
        "question": question,
        "history": [{"report": r, "feedback": f} for r, f in history],
    }


def _parse_report(raw: str) -> tuple[str, bool]:
    """First JSON object in the output; returns (report, had_trailing_noise)."""
    stripped = raw.strip()
    if not stripped:
        raise AdapterError("agent produced no output", raw_output=raw)
    start = stripped.find("{")
    if start < 0:
        raise AdapterError("agent output contains no JSON object", raw_output=raw)
    try:
        obj, end = json.JSONDecoder().raw_decode(stripped[start:])
    except json.JSONDecodeError as exc:
        raise AdapterError(f"agent output is not valid JSON: {exc}", raw_output=raw) from exc
    if not isinstance(obj, dict) or "report" not in obj or not isinstance(obj["report"], str):
        raise AdapterError("agent response must be an object with a string 'report'", raw_output=raw)
    noise = bool(stripped[start + end :].strip()) or start > 0
    return obj["report"], noise


def invoke_agent(adapter: AgentAdapter, transcript: dict) -> str:
    """Run one agent turn over the wire contract. Raises AdapterError on
    timeout, crash, or malformed output."""
    if adapter.kind == SYNTHETIC:
        raise ConfigError("synthetic adapters are stepped in-process, not invoked over the wire")
    if adapter.kind == SUBPROCESS:
        try:
            proc = subprocess.run(
                shlex.split(adapter.locator),
                input=json.dumps(transcript) + "\n",
                capture_output=True,
                text=True,
                timeout=adapter.timeout_s,
            )
        except subprocess.TimeoutExpired as exc:
            raise AdapterError(f"agent timed out after {adapter.timeout_s}s") from exc
        except OSError as exc:
            raise AdapterError(f"agent could not be launched: {exc}") from exc
        if proc.returncode != 0:
            raise AdapterError(
                f"agent exited with status {proc.returncode}", raw_output=proc.stderr[-2000:]
            )
        report, noise = _parse_report(proc.stdout)
        if noise:
            logger.warning("agent %s emitted extra output around its JSON object", adapter.agent_id)
        return report
    # http
    try:
        resp = requests.post(adapter.locator, json=transcript, timeout=adapter.timeout_s)
        resp.raise_for_status()
    except requests.RequestException as exc:
        raise AdapterError(f"agent HTTP call failed: {exc}") from exc
    report, noise = _parse_report(resp.text)
    if noise:
        logger.warning("agent %s returned extra content around its JSON object", adapter.agent_id)
    return report
