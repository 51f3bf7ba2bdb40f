"""Tower-defense simulation, scripted strategies, and a PPO strategy selector."""
from .kernel import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
