"""Exception and warning types shared across the pipeline."""


class StopShopError(Exception):
    pass


class EmptyInput(StopShopError):
    pass


class ConnectivityMismatch(StopShopError):
    def __init__(self, frame_index, message=None):
        self.frame_index = frame_index
        super().__init__(message or f"frame {frame_index} does not share the reference connectivity")


class InvalidSeeds(StopShopError):
    pass


class DegenerateStar(StopShopError):
    def __init__(self, vertex):
        self.vertex = vertex
        super().__init__(f"vertex {vertex} has zero animation-average area in its triangle star")


class OverConstrained(StopShopError):
    pass


class SolveFailure(StopShopError):
    pass


class EmptyPiece(StopShopError):
    def __init__(self, piece):
        self.piece = piece
        super().__init__(f"piece {piece} is assigned to no frame")


class InvalidLibrarySize(StopShopError):
    pass


class CapUnreachable(StopShopError):
    pass


class EmptyPart(StopShopError):
    def __init__(self, part):
        self.part = part
        super().__init__(f"part {part} contains no triangles")


class WarnedUnreachable(UserWarning):
    """Some triangles cannot reach any seed through the dual graph."""
