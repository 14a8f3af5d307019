"""Symbol-level precoding for the multiuser MISO downlink.

Library layout:

* :mod:`slprecode.modem` — constellations, Gray labeling, detection regions.
* :mod:`slprecode.channel` — i.i.d./correlated channel sampling, diagnostics.
* :mod:`slprecode.datavec` — data-vector enumeration and quadrant-symmetry
  reduction.
* :mod:`slprecode.conic` — conic program container over the interior-point
  backend.
* :mod:`slprecode.beamform` — SINR-constrained block-level beamforming.
* :mod:`slprecode.slp` — symbol-level precoding power minimization.
* :mod:`slprecode.slpro` — joint rotation + precoding global optimizer.
* :mod:`slprecode.oracle` — brute-force rotation grid verification.
* :mod:`slprecode.sim` — Monte Carlo experiment harness.
* :mod:`slprecode.cli` — command-line front end.
"""

from . import (  # noqa: F401
    beamform,
    channel,
    conic,
    datavec,
    modem,
    oracle,
    sim,
    slp,
    slpro,
)

__all__ = [
    "beamform",
    "channel",
    "conic",
    "datavec",
    "modem",
    "oracle",
    "sim",
    "slp",
    "slpro",
]

__version__ = "0.1.0"
