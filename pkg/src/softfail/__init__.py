"""Soft-failure evolution on an optical lightpath: EDFA ageing traces, an
encoder-decoder LSTM forecaster and repair-trigger policies."""

__version__ = "0.1.0"
