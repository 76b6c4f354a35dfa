"""Exception types raised across the package."""


class AnchorwatchError(Exception):
    """Base class for every error raised by anchorwatch."""


class DegenerateGeometry(AnchorwatchError, ValueError):
    """An anchor triple cannot be used for trilateration."""


class DegenerateBaseline(DegenerateGeometry):
    pass


class CollinearAnchors(DegenerateGeometry):
    pass


class EmptyInput(AnchorwatchError, ValueError):
    pass


class PlacementExhausted(AnchorwatchError, RuntimeError):
    pass


class CountExceedsPopulation(AnchorwatchError, ValueError):
    pass


class UnknownAnchorId(AnchorwatchError, KeyError):
    pass


class ParseError(AnchorwatchError, ValueError):
    """Malformed reference-store file; ``line`` is 1-based and counts the header."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class SingularCovariance(AnchorwatchError, ValueError):
    pass


class TooFewSamples(AnchorwatchError, ValueError):
    pass


class EmptyStatistics(AnchorwatchError, ValueError):
    pass


class InsufficientNeighbors(AnchorwatchError):
    """No trusted reference triple was available to re-localize an anchor.

    Never raised by the detectors; instances are collected in
    ``DetectionReport.notes`` instead.
    """

    def __init__(self, anchor_id: int, group_id: int):
        super().__init__(f"anchor {anchor_id} in group {group_id}: no trusted reference triple")
        self.anchor_id = anchor_id
        self.group_id = group_id
