"""Numerical experiments for semilinear heat equations driven by sums of squares of vector fields."""

__version__ = "0.1.0"
