"""Grid solver and bound checks for the homogeneous Boltzmann equation for Bose-Einstein particles."""

__version__ = "0.1.0"
