"""datd: deterministic simulator of value-aware truth discovery for price oracles.

Two aggregation schemes over the same two-stage oracle protocol:

* ``baseline`` -- classic iterative truth discovery: aggregate with historical
  credibility, update credibility from this round's deviations.
* ``datd`` -- value-aware variant: an estimate pass predicts each entity's
  next-round credibility, aggregation blends history with that prediction, and
  the credibility update is scaled by the task's transaction value.
"""

__version__ = "0.1.0"

from .errors import DatdError

__all__ = ["DatdError", "__version__"]
