"""Compiler and simulator for ML-enhanced IoT statechart models."""
