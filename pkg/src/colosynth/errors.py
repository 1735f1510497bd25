"""Exception hierarchy.

Each error belongs to a family that maps to a CLI exit code. Pipeline stages
attach a ``stage`` name so failures read like ``centerline: Disconnected: ...``.
"""

from __future__ import annotations

EXIT_IO = 2
EXIT_VALIDATION = 3
EXIT_GEOMETRY = 4
EXIT_RENDER = 5


class ColosynthError(Exception):
    exit_code = 1

    def __init__(self, message: str = "", stage: str | None = None):
        super().__init__(message)
        self.message = message
        self.stage = stage

    def __str__(self) -> str:
        text = f"{type(self).__name__}: {self.message}" if self.message else type(self).__name__
        return f"{self.stage}: {text}" if self.stage else text


class IoError(ColosynthError):
    exit_code = EXIT_IO


class MissingFile(IoError):
    pass


class IoFailure(IoError):
    pass


class ValidationError(ColosynthError):
    exit_code = EXIT_VALIDATION


class MalformedHeader(ValidationError):
    pass


class SizeMismatch(ValidationError):
    pass


class InvalidSpec(ValidationError):
    pass


class InvalidConfig(ValidationError):
    pass


class PoseIndexOutOfRange(ValidationError):
    pass


class GeometryError(ColosynthError):
    exit_code = EXIT_GEOMETRY


class EmptyMask(GeometryError):
    pass


class EndpointInBackground(GeometryError):
    pass


class Disconnected(GeometryError):
    pass


class DegenerateCenterline(GeometryError):
    pass


class TooFewWaypoints(GeometryError):
    pass


class RenderError(ColosynthError):
    exit_code = EXIT_RENDER


class MeshWithoutUVs(RenderError):
    pass


class NonFiniteCamera(RenderError):
    pass
