"""Generation and evaluation of machine-checkable theorem-proving challenges:
Busy-Beaver halting problems and mixed boolean-arithmetic equivalences."""

__version__ = "0.1.0"
