"""Semi-supervised multilevel self-organizing maps for /hVd/ vowel classification."""

__version__ = "0.1.0"
