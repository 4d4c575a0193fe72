"""Video-based microanastomosis skill assessment at desk scale."""

__version__ = "0.1.0"
