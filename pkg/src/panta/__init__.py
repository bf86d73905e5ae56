"""panta: an application kernel whose grammar, programs and UI all live as
utterances in one semantic network."""

__version__ = "0.1.0"

from .store import (  # noqa: F401
    Image, ImageVersion, NetDelta, Pair, RelationKind, SymbolState,
    apply_delta, invert_delta, validate_delta, stats,
)
