"""Bundled example problems and the reference network fixture."""
