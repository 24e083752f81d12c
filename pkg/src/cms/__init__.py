"""Contractive Markov systems on interval partitions and finite-graph subshifts."""
from .system import (Affine, AffineMap, AffineProb, Atom, Edge, Interval, SpecError, SystemSpec, ValidatedSystem,
                     atom_of, load_spec, load_system, parse_spec, validate)

__version__ = "0.1.0"

__all__ = ["Affine", "AffineMap", "AffineProb", "Atom", "Edge", "Interval", "SpecError", "SystemSpec",
           "ValidatedSystem", "atom_of", "load_spec", "load_system", "parse_spec", "validate", "__version__"]
