"""Triangulations, isomorphism signatures, Pachner graphs and their analysis."""
