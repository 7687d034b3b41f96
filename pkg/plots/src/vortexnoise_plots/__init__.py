"""Figure rendering for vortexnoise result directories.

Reads only the documented outputs (CSV tables plus manifest.json) and never
recomputes physics; overlay constants come from the manifest so a figure
cannot drift from the run that produced it.
"""

from .figures import FigureSpec, SchemaError, discover_figures, render

__version__ = "0.1.0"
