"""Sequence-level energy-based language models and their reference machinery."""
