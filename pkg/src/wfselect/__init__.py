"""Ancestry of a rare allele under selection and mutation in a Wright-Fisher diffusion.

Modules
-------
specfun
    Log-space confluent hypergeometric function and its large-parameter forms.
stationary
    Stationary density, sampling probabilities and posterior sampling.
diffusion
    Frequency paths (time-homogeneous, time-varying, conditioned) and
    square-root diffusions.
ancestry
    Coalescence of the A1 (and A2) sample in a random frequency background.
asg
    Conditional ancestral selection graph.
moran
    Moran and birth-death-immigration counterparts.
experiments, cli
    Scenario runners and the ``wfselect`` command.
"""
from .specfun import AsymRegime, HypArgs, LogValue, hyp1f1, hyp1f1_asym, log_hyp1f1
from .stationary import (ModelParams, SampleCounts, ScaledSelection, posterior_sample,
                         sampling_prob, sampling_prob_asym, stationary_pdf)

__version__ = "0.1.0"

__all__ = [
    "AsymRegime",
    "HypArgs",
    "LogValue",
    "ModelParams",
    "SampleCounts",
    "ScaledSelection",
    "hyp1f1",
    "hyp1f1_asym",
    "log_hyp1f1",
    "posterior_sample",
    "sampling_prob",
    "sampling_prob_asym",
    "stationary_pdf",
]
