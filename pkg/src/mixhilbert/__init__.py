"""Two-species Boltzmann mixtures with unequal masses: collision operators,
linearised operator, kernel bounds, the Euler/acoustic hierarchy and
Hilbert-expansion rate studies."""

__version__ = "0.1.0"
