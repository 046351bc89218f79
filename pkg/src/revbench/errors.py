"""Exception hierarchy shared across the harness."""

from __future__ import annotations


class RevbenchError(Exception):
    """Base class for all harness errors."""


class DatasetError(RevbenchError):
    """Dataset file is malformed or violates a checklist invariant."""


class TemplateError(RevbenchError):
    """Unknown template id or missing placeholder binding."""


class TransportError(RevbenchError):
    """Transient transport failure (timeout, connection reset, 5xx)."""

    def __init__(self, message: str, template_id: str | None = None):
        super().__init__(message)
        self.template_id = template_id


class AuthError(RevbenchError):
    """Authentication rejected by the backend; never retried."""


class JudgeFormatError(RevbenchError):
    """Judge output could not be parsed into its verdict type."""

    def __init__(self, message: str, raw: str = ""):
        super().__init__(message)
        self.raw = raw


class ScriptedResponseMissing(RevbenchError):
    """A scripted backend has no canned response for the request key."""


class ConfigError(RevbenchError):
    """Invalid harness configuration."""


class AdapterError(RevbenchError):
    """Agent adapter crashed, timed out, or broke the wire contract."""

    def __init__(self, message: str, raw_output: str = ""):
        super().__init__(message)
        self.raw_output = raw_output


class ReviserTimeout(RevbenchError):
    """Reviser loop hit the hard turn cap without producing a report."""
