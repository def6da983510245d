"""OSGS-stabilized convection-diffusion-reaction solver with goal-oriented error estimates."""
__version__ = "0.1.0"

from .kernels import BACKEND  # noqa: E402,F401
