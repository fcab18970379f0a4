"""Bethe-Ansatz dressed quantities and form-factor asymptotics for the XXZ chain."""

__version__ = "0.1.0"
