"""Effective-length workbench for Boolean block encoders and interference channels with feedback."""

__version__ = "0.1.0"
