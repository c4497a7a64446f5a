"""Python bindings for the star-tree paradox library."""

try:
    from . import _core
except ImportError:  # in-tree build: _core sits next to the package on sys.path
    import _core

from_core = [name for name in dir(_core) if not name.startswith("_")]
globals().update({name: getattr(_core, name) for name in from_core})
__version__ = _core.__version__
__all__ = from_core + ["__version__"]
del from_core
