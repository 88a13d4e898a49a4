"""Desk-scale laboratory for the stochastic complex Ginzburg-Landau equation.

Subpackage map:

* :mod:`cglab.fields`        periodic lattice fields, heat semigroup, mollifiers
* :mod:`cglab.besov`         Littlewood-Paley blocks, Besov and space-time norms
* :mod:`cglab.paraproducts`  Bony calculus (paraproducts, resonants, commutators)
* :mod:`cglab.noise`         complex space-time white noise and OU objects
* :mod:`cglab.drivers`       the stochastic driving vector and its norm
* :mod:`cglab.system`        the paracontrolled (v,w) dynamics and direct solver
* :mod:`cglab.monitors`      energy inequalities, ledgers, regime checks
* :mod:`cglab.config`        run configuration, records, checkpointing
* :mod:`cglab.cli`           command-line harness
"""

from .fields import Field, Grid, Mollifier, Propagator
from .besov import BesovIndex, DyadicPartition, Trajectory, build_partition

__all__ = [
    "Field",
    "Grid",
    "Mollifier",
    "Propagator",
    "BesovIndex",
    "DyadicPartition",
    "Trajectory",
    "build_partition",
]

__version__ = "0.1.0"
