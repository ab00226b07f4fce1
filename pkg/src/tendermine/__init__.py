"""Mining lot and item information from healthcare procurement documents."""

__version__ = "0.1.0"
