"""Event-type-aware audio-visual fusion."""

__version__ = "0.1.0"
