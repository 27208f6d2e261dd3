"""Trigonometric potentials on tori, their Morse and Cartan-type checks, and
spectra of the associated quasiperiodic Schrodinger operators."""
__version__ = "0.1.0"
