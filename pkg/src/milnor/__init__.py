"""Real Milnor fibers of polynomial germs, their Morse data and Gauss-Manin periods,
with a toy encryption scheme built on Morse vectors."""

from .errors import (CatalogError, DecryptionError, DegenerateCritical, DimensionMismatch, DomainError,
                     GermParseError, MilnorError, NoConvergence, NotIsolated, PoleError, PoleProximity,
                     ProtocolViolation, UnknownMessage)
from .germ import PolynomialGerm, WeightVector, load_germ, parse_germ
from .morse import Box, CriticalPoint, Morsification, MorseVector, find_critical_points, morse_vectors

__version__ = "0.1.0"
