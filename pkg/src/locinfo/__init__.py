"""Uniformity testing and learning under local information constraints.

Submodules:

* ``dist_core``: distributions, the paired perturbation family, divergences;
* ``channels``: channels, the channel information matrix and its norms;
* ``protocols``: the interactive protocol runtime and the testers;
* ``oracle``: exact small-instance enumeration of transcripts and checks
  of the information inequalities;
* ``bounds``, ``experiments``, ``verify``, ``cli``: the lower-bound
  calculator, Monte Carlo harness and command line;
* ``estimators``: scikit-learn style wrappers around the testers.
"""

from .channels import Channel, FamilyNorms, InfoMatrix, channel_norms, info_matrix, norms
from .dist_core import Distribution, PerturbationSign, far_dist, paninski_dist, uniform_dist
from .protocols import Decision, ProtocolStrategy, TesterConstants, Transcript

__all__ = [
    "Channel",
    "Decision",
    "Distribution",
    "FamilyNorms",
    "InfoMatrix",
    "PerturbationSign",
    "ProtocolStrategy",
    "TesterConstants",
    "Transcript",
    "channel_norms",
    "far_dist",
    "info_matrix",
    "norms",
    "paninski_dist",
    "uniform_dist",
]

__version__ = "0.1.0"
