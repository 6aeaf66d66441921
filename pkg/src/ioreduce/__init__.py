"""Break-even modeling, blocked compression and backlog simulation for parallel output."""

__version__ = "0.1.0"
