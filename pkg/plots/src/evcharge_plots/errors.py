"""Error types for the figure renderer."""


class SchemaMismatchError(Exception):
    """Input CSV does not match the documented benchmark schema."""


class PlotIOError(Exception):
    """Reading an input CSV or writing the output image failed."""
