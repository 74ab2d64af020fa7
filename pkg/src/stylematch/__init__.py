"""Language style matching analytics for repository conversation data."""

__version__ = "0.1.0"
