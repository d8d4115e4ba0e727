from functools import lru_cache

from .arith import ArithConstraints, arith_registry
from .doubleadd import DoubleAddConfig, doubleadd_registry
from .grids import grid_registry

DOMAINS = ("grid", "arith24", "doubleadd")


def registry_for(domain: str, **kwargs):
    """The function registry for a domain name (registries are immutable and shared)."""
    return _registry_for(domain, tuple(sorted(kwargs.items())))


@lru_cache(maxsize=None)
def _registry_for(domain: str, items: tuple):
    kwargs = dict(items)
    if domain == "grid":
        return grid_registry()
    if domain == "arith24":
        return arith_registry(ArithConstraints(**kwargs))
    if domain == "doubleadd":
        return doubleadd_registry(DoubleAddConfig(**kwargs))
    raise ValueError(f"unknown domain {domain!r}; expected one of {DOMAINS}")


__all__ = [
    "DOMAINS",
    "ArithConstraints",
    "DoubleAddConfig",
    "arith_registry",
    "doubleadd_registry",
    "grid_registry",
    "registry_for",
]
