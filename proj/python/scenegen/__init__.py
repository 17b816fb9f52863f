"""Compositional 3D scene generation: synthesis, training, sampling, evaluation."""

try:
    # Installed layout: the compiled module lives inside this package.
    from ._scenegen import *  # noqa: F401,F403
    from ._scenegen import __doc__  # noqa: F401
except ImportError:
    # In-build layout: the compiled module sits on PYTHONPATH next to the
    # build tree (used by the ctest smoke run).
    from _scenegen import *  # noqa: F401,F403
    from _scenegen import __doc__  # noqa: F401

__version__ = "0.1.0"
