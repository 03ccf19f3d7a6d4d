"""Transfer operators, g-measures, g-chains and likelihood-ratio martingales
on one-sided shifts over a finite alphabet."""

__version__ = "0.1.0"
