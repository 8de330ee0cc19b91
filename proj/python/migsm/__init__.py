"""Python bindings for the search-and-matching immigration toolkit."""

try:
    from . import _core
except ImportError:  # development layout: extension next to the package dir
    import _core

globals().update(
    {name: getattr(_core, name) for name in dir(_core) if not name.startswith("_")}
)
__version__ = _core.__version__
