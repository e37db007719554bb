"""Administrative service: validation, submission, monitoring, HTTP API."""

from .service import ControlCenter, SubmitOutcome

__all__ = ["ControlCenter", "SubmitOutcome"]
