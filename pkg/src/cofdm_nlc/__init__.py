"""Nonlinearity-compensation simulator for CO-OFDM superchannels."""
