"""Simulated decentralized marketplace for lunar mapping jobs."""

__version__ = "0.1.0"
