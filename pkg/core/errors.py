"""
Error type shared by the laboratory modules.
"""

from typing import Any, Optional


class LabError(ValueError):
    """Raised when an estimator or builder rejects its input.

    The ``code`` attribute carries a short machine-readable reason such as
    ``"dimension"``, ``"below_resolution"`` or ``"insufficient_scales"``;
    callers branch on it instead of parsing the message.
    """

    def __init__(self, code: str, message: str = "", detail: Optional[Any] = None):
        self.code = code
        self.message = message or code
        self.detail = detail
        super().__init__(f"[{code}] {self.message}")
