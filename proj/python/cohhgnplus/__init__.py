"""Session-based recommendation engine backed by the C++ core."""

from cohhgnplus._core import (
    ConfigError,
    DataError,
    NumericError,
    Pipeline,
    item_position_encoding,
    mrr_at_k,
    precision_at_k,
    price_bin_boundaries,
    rank_of,
    synth_csv,
    week_encoding,
)

__all__ = [
    "ConfigError",
    "DataError",
    "NumericError",
    "Pipeline",
    "item_position_encoding",
    "mrr_at_k",
    "precision_at_k",
    "price_bin_boundaries",
    "rank_of",
    "synth_csv",
    "week_encoding",
]
