"""Numerical geometry: metrics, curvature, gluing and conformal change."""
