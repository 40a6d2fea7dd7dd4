"""
Configuration module for the BSRN toolkit.
"""
from .settings import settings

__all__ = ['settings']
