"""Hyperdimensional computing engine and speckle-simulation harness.

Submodules are imported explicitly (``from hdspeckle import hv``); the
package root stays import-light so the CLI can cap BLAS threads before
numpy loads.
"""

__version__ = "0.1.0"
