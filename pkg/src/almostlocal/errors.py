"""Exception hierarchy.

Every error raised on purpose by the package derives from
:class:`AlmostLocalError`, so callers (and the CLI) can catch one base
class and still dispatch on the category.
"""


class AlmostLocalError(Exception):
    """Base class for all package errors."""


# -- mesh ---------------------------------------------------------------------


class MeshError(AlmostLocalError, ValueError):
    """Invalid mesh combinatorics or geometry."""


class NonManifoldEdge(MeshError):
    pass


class NonManifoldVertex(MeshError):
    pass


class InconsistentOrientation(MeshError):
    pass


class DegenerateFace(MeshError):
    pass


class UnreferencedVertex(MeshError):
    pass


class LevelTooLarge(MeshError):
    pass


class SharedCombinatoricsMismatch(MeshError):
    pass


class DegenerateFrame(MeshError):
    """A frame of a path has a face below the area floor."""


class MeshIOError(AlmostLocalError, OSError):
    pass


class ParseError(MeshIOError):
    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)


class UnsupportedElement(ParseError):
    pass


# -- geometry -----------------------------------------------------------------


class GeometryError(AlmostLocalError, ArithmeticError):
    pass


class ZeroVectorArea(GeometryError):
    def __init__(self, vertex, frame=None):
        self.vertex = int(vertex)
        self.frame = frame
        msg = f"vector area vanishes at vertex {self.vertex}"
        if frame is not None:
            msg += f" (frame {frame})"
        super().__init__(msg)


class DegenerateAngle(GeometryError):
    pass


class ZeroLengthEdge(GeometryError):
    pass


# -- metric / analytics -------------------------------------------------------


class DomainError(AlmostLocalError, ValueError):
    pass


class UnsupportedWeight(AlmostLocalError, ValueError):
    pass


class NoAnalyticForm(UnsupportedWeight):
    pass


class FitFailure(AlmostLocalError, RuntimeError):
    pass


class NoPositiveOptimum(AlmostLocalError, ValueError):
    pass


class IntegrationError(AlmostLocalError, RuntimeError):
    pass


class BlowupDetected(IntegrationError):
    pass


class StepFailure(IntegrationError):
    pass


class InapplicableBound(AlmostLocalError, ValueError):
    pass


# -- cli ----------------------------------------------------------------------


class ConfigError(AlmostLocalError, ValueError):
    pass
