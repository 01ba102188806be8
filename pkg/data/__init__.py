"""
Data module for writing run artifacts
"""

from .storage import ArtifactStore, FLOAT_FORMAT

__all__ = ['ArtifactStore', 'FLOAT_FORMAT']
