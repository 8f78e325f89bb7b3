"""Test suite for the QPIE circuit engine."""
