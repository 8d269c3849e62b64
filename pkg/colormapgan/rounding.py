"""Functions to round and clamp values in the modes the pipeline relies on."""

from decimal import Decimal as dec
from decimal import localcontext

import numpy as np

# numpy.rint rounds half to even on every platform, which is what keeps recoloured
# images identical between machines


def round_half_even(values: np.ndarray) -> np.ndarray:
    """Round to the nearest integer, ties toward the even neighbour."""
    return np.rint(values)


def to_uint8(values: np.ndarray) -> np.ndarray:
    """Round half to even, clamp to [0, 255] and return an 8-bit array."""
    return np.clip(round_half_even(values), 0, 255).astype(np.uint8)


def floor_to_uint8(values: np.ndarray, guard: float = 0.0) -> np.ndarray:
    """Floor (after adding `guard`), clamp to [0, 255] and return an 8-bit array."""
    return np.clip(np.floor(values + guard), 0, 255).astype(np.uint8)


def to_places(num: float, ndigits=2, rounding="ROUND_HALF_EVEN") -> dec:
    """Round a number to the specified number of decimal places, for reports.

    Goes through `Decimal` so the printed value is the same wherever the report is
    produced.
    """
    # Use in a local context so that user's context isn't overwritten
    with localcontext() as ctx:
        ctx.rounding = rounding
        rounded = round(dec(repr(float(num))), ndigits)
    return rounded
