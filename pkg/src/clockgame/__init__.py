"""Clock-game simulation: time-bin QND measurement with entangled qudit ancillas."""

__version__ = "0.1.0"
