"""Fault detection and isolation for multi-agent spacecraft inspection."""

__version__ = "0.1.0"
