"""Verification harnesses built on the core estimators."""
