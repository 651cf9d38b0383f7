"""Console helpers for experiment runs."""
