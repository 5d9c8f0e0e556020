"""Orientational quantum revivals of polar rigid rotors driven by single-cycle THz pulses."""

__version__ = "0.1.0"
