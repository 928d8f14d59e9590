"""Exceptions raised by critset."""

from typing import Iterable, Sequence


class CritsetError(Exception):
    """Base class for all critset errors."""


class ArrangementError(CritsetError, ValueError):
    """Invalid arrangement data or an out-of-range request."""


class DiscriminantError(ArrangementError):
    """The fiber point lies on (or too close to) the discriminant."""

    def __init__(self, members: Sequence[Sequence[int]], detail: str = ""):
        self.members = [tuple(m) for m in members]
        labels = ", ".join(_label(m) for m in self.members)
        message = f"x on discriminant: circuit {labels}"
        if detail:
            message += f" ({detail})"
        super().__init__(message)


class ConsistencyError(CritsetError, RuntimeError):
    """An identity that must hold by construction failed."""


class DegenerateError(CritsetError):
    """A degenerate critical point where a nondegenerate one is required."""


class SpectrumError(CritsetError):
    """The restricted operator pencil stayed defective."""


class TransportError(CritsetError):
    """Numerical integration of the flat-section equations failed."""


def _label(members: Iterable[int]) -> str:
    return "{" + ",".join(str(i + 1) for i in members) + "}"
