"""Hybrid quantum-classical feature selection via polynomial binary optimization.

Subpackages by stage: :mod:`dataset` and :mod:`infotheory` score features,
:mod:`pcbo` builds problems, :mod:`simulator` and :mod:`hrqaoa` run recursive
QAOA, :mod:`classical` supplies solvers, :mod:`sparsify` and :mod:`resource`
cover circuit-size and runtime models, :mod:`cli` wires the stages together.
"""

__version__ = "0.1.0"
