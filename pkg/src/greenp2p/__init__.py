"""Pollution-resistant P2P content sharing: protocol library and simulator."""

__version__ = "0.1.0"
