"""Discrete-time laboratory for McKean-Vlasov BSDEs and their mean-field particle systems."""

__version__ = "0.1.0"
