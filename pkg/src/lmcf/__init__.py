"""Numerical toolkit for f-minimal Lagrangians and generalized Lagrangian mean curvature flow in C^m."""

__version__ = "0.1.0"
