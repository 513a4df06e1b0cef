"""Figure renderer for perclr CSV outputs.

Reads the estimator CSV schemas verbatim and draws four figure kinds:
theta_curve (exponent vs beta against the 1 - beta reference and a
c / log beta decay guide), loglog_ladder (distance scale vs box size with
fitted slopes and confidence bands), telescope (interpolation term decay
by length class), and cutpoints (sampled cut-point means against exact
values).  Inputs are never modified; identical inputs render identical
bytes.
"""

from .figspec import KINDS, SCHEMAS, FigureSpec, SpecError, load_rows
from .render import PlotResult, plot

__version__ = "0.1.0"

__all__ = [
    "KINDS",
    "SCHEMAS",
    "FigureSpec",
    "PlotResult",
    "SpecError",
    "load_rows",
    "plot",
    "__version__",
]
