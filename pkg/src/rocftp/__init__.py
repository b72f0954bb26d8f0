"""Exact sampling from Markov chains via coupled random maps.

The package provides three engines that all return draws exactly
distributed by the stationary law of a supplied grand coupling:

- ``citp_cftp``: composes random maps into the past, tracking the
  composed map explicitly (needs an enumerable state space);
- ``binary_backoff_cftp``: doubles the look-back depth per sample and
  re-reads seeded randomness so deeper passes agree with shallower ones;
- ``read_once_cftp``: a single forward pass over one randomness stream,
  emitting a sample at every coalescent composite map.

Chains plug in through the ``GrandCoupling`` interface; built-in examples
live in ``rocftp.chains``, spanning-tree and point-process samplers in
``rocftp.ciaftp`` and ``rocftp.strauss``.
"""

from .backend import backend_name, compiled_active, have_compiled, set_backend
from .core import (
    DEFAULT_MAP_CAP,
    DEFAULT_STATE_CAP,
    CitpResult,
    CompositeMapOutcome,
    GrandCoupling,
    compose_into_the_past,
    compose_into_the_past_biased,
)
from .engines import (
    COMPOSITE_VARIANTS,
    EngineReport,
    ReadOnceSampler,
    apply_composite_map_first_special,
    apply_composite_map_interleaved,
    apply_composite_map_memory,
    binary_backoff_cftp,
    citp_cftp,
    read_once_cftp,
)
from .errors import (
    CapExceededError,
    NonCoalescenceError,
    ReadOnceViolationError,
    RocftpError,
)
from .points import PointConfiguration, Rectangle
from .stream import (
    GUARD,
    ReadOnceStream,
    SeededReplayStream,
    derive_seed,
)
from .strauss import StraussModel, sample_strauss

__version__ = "0.1.0"

__all__ = [
    "COMPOSITE_VARIANTS",
    "CapExceededError",
    "CitpResult",
    "CompositeMapOutcome",
    "DEFAULT_MAP_CAP",
    "DEFAULT_STATE_CAP",
    "EngineReport",
    "GUARD",
    "GrandCoupling",
    "NonCoalescenceError",
    "PointConfiguration",
    "ReadOnceSampler",
    "ReadOnceStream",
    "ReadOnceViolationError",
    "Rectangle",
    "RocftpError",
    "SeededReplayStream",
    "StraussModel",
    "sample_strauss",
    "__version__",
    "apply_composite_map_first_special",
    "apply_composite_map_interleaved",
    "apply_composite_map_memory",
    "backend_name",
    "binary_backoff_cftp",
    "citp_cftp",
    "compiled_active",
    "compose_into_the_past",
    "compose_into_the_past_biased",
    "derive_seed",
    "have_compiled",
    "read_once_cftp",
    "set_backend",
]
