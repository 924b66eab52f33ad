"""Exception hierarchy shared by every pipeline stage.

Each error carries a short machine-readable ``code`` (the class name) so the
CLI can print a single parsable line before exiting non-zero.
"""


class EtslError(Exception):
    """Base class for all pipeline errors."""

    @property
    def code(self) -> str:
        return type(self).__name__


# landmark files and manifests
class MalformedHeader(EtslError, ValueError):
    pass


class BadPointCount(EtslError, ValueError):
    def __init__(self, frame_index: int, count: int):
        super().__init__(f"frame {frame_index} has {count} points, expected 53")
        self.frame_index = frame_index
        self.count = count


class NonFiniteCoordinate(EtslError, ValueError):
    pass


class NonMonotonicFrameIndex(EtslError, ValueError):
    pass


class InvariantViolation(EtslError, ValueError):
    pass


class DuplicateClipId(EtslError, ValueError):
    pass


class UnknownSplitTag(EtslError, ValueError):
    pass


class MissingLandmarkFile(EtslError, FileNotFoundError):
    pass


# preprocessing
class DegenerateFrame(EtslError, ValueError):
    pass


class ShouldersNotVisible(EtslError, ValueError):
    pass


# skeleton graph
class DisconnectedGraph(EtslError, ValueError):
    pass


class DimensionMismatch(EtslError, ValueError):
    pass


# model / training
class SourceTooLong(EtslError, ValueError):
    pass


class TargetTooLong(EtslError, ValueError):
    pass


class AllPositionsPadded(EtslError, ValueError):
    pass


class EmptySplit(EtslError, ValueError):
    pass


class NonFiniteLoss(EtslError, ArithmeticError):
    pass


# metrics / stats
class LengthMismatch(EtslError, ValueError):
    pass


class EmptyCorpus(EtslError, ValueError):
    pass


class MissingHypothesis(EtslError, KeyError):
    def __str__(self) -> str:  # KeyError quotes its message otherwise
        return str(self.args[0]) if self.args else ""


# synthetic data / config
class VocabTooLarge(EtslError, ValueError):
    pass


class ConfigError(EtslError, ValueError):
    pass
