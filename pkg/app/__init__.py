"""QPIE circuit engine."""
