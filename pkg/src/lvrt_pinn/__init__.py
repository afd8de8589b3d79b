"""LVRT boundaries of grid-following converters via physics-informed ReLU networks and MILP."""

__version__ = "0.1.0"
