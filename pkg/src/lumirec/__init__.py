"""Smart-lighting routine recommendation and scene prediction pipeline."""

__version__ = "0.1.0"
