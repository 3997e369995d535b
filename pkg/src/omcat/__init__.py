"""Driven cavity optomechanics: exact, perturbative and dissipative dynamics of
the mechanical state and its Wigner negativity."""
__version__ = "0.1.0"

from .fock import HilbertConfig, TruncationWarning  # noqa: E402
from .model import SystemParams  # noqa: E402

__all__ = ["HilbertConfig", "SystemParams", "TruncationWarning", "__version__"]
