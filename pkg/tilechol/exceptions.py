from typing import Any, Dict, Optional


class TileCholError(Exception):
    """Base class for every error raised by the factorization engine."""

    fields: tuple = ()

    def __init__(self, message: str = "", **kwargs: Any):
        self.message = message or self.__class__.__name__
        for name in self.fields:
            setattr(self, name, kwargs.get(name))
        super().__init__(self.message)

    def to_dict(self) -> Dict[str, Any]:
        """Machine readable error object reported by the CLI."""
        out: Dict[str, Any] = {"error": self.__class__.__name__, "message": self.message}
        for name in self.fields:
            value = getattr(self, name)
            if hasattr(value, "as_tuple"):
                value = list(value.as_tuple())
            out[name] = value
        return out


class NotPositiveDefinite(TileCholError):
    fields = ("pivot_index", "tile")

    def with_tile(self, tile: Any) -> "NotPositiveDefinite":
        return NotPositiveDefinite(
            f"pivot {self.pivot_index} of tile {tile} is not positive",
            pivot_index=self.pivot_index,
            tile=tile,
        )


class SingularDiagonal(TileCholError):
    fields = ("index", )


class UnsupportedSmoothness(TileCholError):
    fields = ("nu", )


class ZeroMatrix(TileCholError):
    pass


class CapacityExhausted(TileCholError):
    fields = ("device", "requested", "capacity")


class NotCached(TileCholError):
    fields = ("tile", "device")


class ConfigInfeasible(TileCholError):
    fields = ("reason", )


class DeadlineExceeded(TileCholError):
    fields = ("tile", "timeout")


class NonPositiveDiagonal(TileCholError):
    fields = ("index", )


class DimensionMismatch(TileCholError):
    fields = ("expected", "actual")


class MalformedInput(TileCholError):
    fields = ("reason", )


def error_object(exc: BaseException, extra: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """Convert any exception into the CLI error object"""
    if isinstance(exc, TileCholError):
        out = exc.to_dict()
    else:
        out = {"error": exc.__class__.__name__, "message": str(exc)}
    if extra:
        out.update(extra)
    return out


class RunAborted(TileCholError):
    """Raised in waiting workers once another worker has failed"""
