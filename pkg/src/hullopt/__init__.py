"""Surrogate-assisted thickness optimization of a parameterized hull girder."""
__version__ = "0.1.0"
