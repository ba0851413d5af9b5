"""Figure analogs for lanedep Monte Carlo output directories.

Renders purely from the documented CSV files (plus resolved.ini for lane
geometry); never imports the simulation package.
"""

__version__ = "0.1.0"

from .render import FIGURE_IDS, render, render_all

__all__ = ["FIGURE_IDS", "render", "render_all"]
