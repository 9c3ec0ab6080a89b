"""
Exceptions raised by the toolkit. All of them are ValueError subclasses, so callers that only care
about "bad input" can catch ValueError.
"""
from typing import Optional

__all__ = [
    'NgnnError',
    'ShapeError',
    'GraphError',
    'DatasetError',
    'SpecParseError',
    'ConfigError',
    'CheckpointError',
]


class NgnnError(ValueError):
    """Base class of every toolkit error."""


class ShapeError(NgnnError):
    """Tensor, layer or optimizer dimensions do not line up."""


class GraphError(NgnnError):
    """Invalid graph input or an infeasible graph operation."""


class DatasetError(NgnnError):
    """A dataset file is missing, malformed or inconsistent."""


class SpecParseError(NgnnError):

    def __init__(self, message: str, position: int):
        """
        SpecParseError: a malformed NGNN spec string.
        Args:
            message: what went wrong.
            position: 0-based character offset where parsing failed.
        """
        super().__init__(f"{message} (at position {position})")
        self.position = position


class ConfigError(NgnnError):

    def __init__(self, message: str, field: Optional[str] = None):
        """
        ConfigError: a configuration value violates the schema.
        Args:
            message: what went wrong.
            field: the dotted name of the offending field, if known.
        """
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


class CheckpointError(NgnnError):
    """A checkpoint file is corrupt, truncated or of an unsupported version."""
