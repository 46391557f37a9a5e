"""Hybrid quantum split learning: simulator, models, protocol, defense and attacks."""
__version__ = "0.1.0"
