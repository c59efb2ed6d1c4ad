"""Shared model builders for the test suite."""

import numpy as np
import pytest

from fdekit.fading_memory import DelayKernel
from fdekit.models import (
    CooperativeLVSpec,
    LogisticNetSpec,
    NonautLVSpec,
    StageStructuredSpec,
    TimeCoefficient,
    same_kernel,
)


def exp_kernel(decay=1.0, damping=0.0):
    return DelayKernel.exponential(decay=decay, damping=damping)


def symmetric_lv():
    """Two symmetric patches: equilibrium (1, 1), growth margin 1.5."""
    k = exp_kernel()
    return CooperativeLVSpec(
        beta=[1.0, 1.0],
        mu=[2.0, 2.0],
        a=[[0.0, 0.5], [0.5, 0.0]],
        d=[[0.0, 0.5], [0.5, 0.0]],
        eta=same_kernel(k, 2),
        nu=same_kernel(k, 2),
    )


def symmetric_stage(c=0.25):
    """Two symmetric stage-structured competitors; equilibrium 0.8 for c=0.25."""
    k = exp_kernel()
    return StageStructuredSpec(
        alpha=[2.0, 2.0], beta=[1.0, 1.0], gamma=[1.0, 1.0], c=[c, c], kernels=(k, k)
    )


def scalar_logistic(tau=1.0, saturating=True):
    """Scalar saturating-growth logistic model: bounds m0 = 0.3, M0 = 1.5."""
    return LogisticNetSpec(
        alpha=[[2.0]],
        beta=[[1.0 if saturating else 0.0]],
        tau=[[tau]],
        d=[[0.0]],
        sigma=[[0.0]],
        mu=[0.5],
        kappa=[1.0],
    )


def logistic_pair():
    """Two coupled saturating-logistic classes: M0 = 1.75."""
    return LogisticNetSpec(
        alpha=[[2.0], [2.0]],
        beta=[[1.0], [1.0]],
        tau=[[1.0], [1.0]],
        d=[[0.0, 0.25], [0.25, 0.0]],
        sigma=[[0.0, 1.0], [1.0, 0.0]],
        mu=[0.5, 0.5],
        kappa=[1.0, 1.0],
    )


def forced_lv():
    """Seasonally forced two-patch system with positive lower growth envelope."""
    k = exp_kernel()
    wave = TimeCoefficient(1.0, 0.5, 1.0)
    inter = TimeCoefficient(0.5, 0.25, 1.0)
    return NonautLVSpec(
        beta=(wave, wave),
        mu=(2.0, 2.0),
        a=((0.0, inter), (inter, 0.0)),
        d=((0.0, 0.5), (0.5, 0.0)),
        eta=same_kernel(k, 2),
        nu=same_kernel(k, 2),
    )
