"""CSV-driven figure rendering for risjcas experiment outputs."""

__version__ = "0.1.0"

from .render import KINDS, EmptySeriesWarning, MissingColumnError, PlotJob, render
