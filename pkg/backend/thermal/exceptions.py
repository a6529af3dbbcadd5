"""Error taxonomy shared by the pipeline and the statistics.

Every family carries the exit code the management commands return for it:
0 ok, 1 configuration, 2 io, 3 geometry, 4 signal-degenerate, 5 stats-shape.
"""


class NoseHeatError(Exception):
    exit_code = 1


class ConfigurationError(NoseHeatError):
    exit_code = 1


class InvalidSpec(ConfigurationError):
    pass


# Frame files

class FrameIOError(NoseHeatError):
    exit_code = 2


class BadMagic(FrameIOError):
    pass


class DimensionMismatch(FrameIOError):
    pass


class NonMonotonicTime(FrameIOError):
    pass


class OutOfRangeTemp(FrameIOError):
    pass


class InvalidSequence(FrameIOError):
    pass


class IoFailure(FrameIOError):
    pass


# ROI geometry and tracking

class GeometryError(NoseHeatError):
    exit_code = 3


class SeedOutOfBounds(GeometryError):
    pass


class InvalidRoi(GeometryError):
    pass


class EmptyRoi(GeometryError):
    pass


class EmptySequence(GeometryError):
    pass


# Signals and metrics

class SignalError(NoseHeatError):
    exit_code = 4


class TooShort(SignalError):
    pass


class AllOutliers(SignalError):
    pass


class RateTooLow(SignalError):
    pass


class ConstantSignal(SignalError):
    pass


class LengthMismatch(SignalError):
    pass


# Statistics

class StatsShapeError(NoseHeatError):
    exit_code = 5


class IncompleteTable(StatsShapeError):
    pass


class DegenerateVariance(StatsShapeError):
    pass


class ZeroVariance(StatsShapeError):
    pass


class ConstantSeries(StatsShapeError):
    pass


class PairLengthMismatch(StatsShapeError):
    pass


# Session records fed to the statistics

class InvalidRecord(NoseHeatError):
    exit_code = 2
