"""Pulse-coupled oscillator synchronisation as a source of shared secret keys."""
