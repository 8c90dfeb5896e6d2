"""
Electron-nuclear spin qudit memory simulator
"""

__version__ = "0.1.0"
