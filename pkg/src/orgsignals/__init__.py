"""Communication-signal analytics over e-mail archives.

Pipeline: ingest mail into a canonical event stream, build windowed
interaction graphs, compute six signal metrics per organizational unit
(structure, dynamics, content), and calibrate them against a performance
variable with nested OLS models.
"""

from .graph import KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]
