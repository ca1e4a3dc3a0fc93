"""Multiview Hessian discriminative sparse coding."""

from ._core import *  # noqa: F401,F403
from ._core import FormatError, NumericalError, ValidationError  # noqa: F401
