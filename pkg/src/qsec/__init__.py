"""Desk-scale quantum cryptography: MUBs, quantum one-time pad, BB84 and an anonymous ring."""

__version__ = "0.1.0"
