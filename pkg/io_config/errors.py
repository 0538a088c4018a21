"""Errors raised while reading configuration and artifact files."""

from typing import Optional


class ConfigParseError(ValueError):
    """Malformed, missing or version-mismatched configuration field."""

    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        where = []
        if field is not None:
            where.append(f"field {field}")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.field = field
        self.detail = message
        self.line = line


class ModelFormatError(ValueError):
    """Model or artifact file with bad magic, unknown version or truncated contents."""
