"""Simulator for programmable DC voltage sources built from memristors in TIA feedback."""

__version__ = "0.1.0"
