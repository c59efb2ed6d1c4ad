"""Iterative two-sided equilibrium bounds for the stage-structured
competition model.

Each level freezes the competitor at its previous bound (plus/minus a slack
delta) and reads off the equilibrium of the resulting one-sided cooperative
comparison system, giving a nondecreasing sequence of lower bounds and a
nonincreasing sequence of upper bounds.  With a fixed slack the pair
converges to a delta-wide straddle of the true equilibrium; halving the
slack per level closes the straddle entirely.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .certificates import stage_certificate, stage_delta_margins, stage_equilibrium
from .errors import BoundCollapseError, PreconditionError
from .models import StageStructuredSpec


@dataclass
class BoundIterate:
    level: int
    lower: np.ndarray
    upper: np.ndarray
    delta: float

    def as_row(self):
        return (
            self.level,
            self.delta,
            float(self.lower[0]),
            float(self.lower[1]),
            float(self.upper[0]),
            float(self.upper[1]),
        )


@dataclass
class IterationVerdict:
    converged: bool
    levels: int
    gap: float
    limit_lower: np.ndarray
    limit_upper: np.ndarray
    equilibrium: np.ndarray
    equilibrium_gap: float
    monotonicity_violations: int = 0


def _require_valid_delta(spec, delta):
    if not delta > 0:
        raise PreconditionError("delta must be positive")
    m1, m2 = stage_delta_margins(spec, delta)
    if m1 <= 0 or m2 <= 0:
        raise PreconditionError(
            f"delta={delta} violates the slack conditions (margins {m1:.3g}, {m2:.3g})"
        )


def first_bounds(spec: StageStructuredSpec, delta) -> BoundIterate:
    """Level-1 bounds: upper from dropping competition entirely, lower from
    freezing the competitor at that upper value plus the slack."""
    cert = stage_certificate(spec)
    if not (cert.persistent and cert.permanent):
        raise PreconditionError("stage certificate conditions fail; no bounding scheme")
    _require_valid_delta(spec, delta)
    kappa = spec.maturation_mass()
    gain = spec.alpha * kappa
    upper = gain / spec.beta
    lower = np.array(
        [
            (gain[0] - spec.c[0] * (upper[1] + delta)) / spec.beta[0],
            (gain[1] - spec.c[1] * (upper[0] + delta)) / spec.beta[1],
        ]
    )
    return BoundIterate(level=1, lower=lower, upper=upper, delta=float(delta))


def _next_level(spec, gain, previous: BoundIterate, delta) -> BoundIterate:
    # freezing the competitor below its lower bound (minus slack) cannot go
    # below extinction, hence the clamp at zero
    upper = (gain - spec.c * np.maximum(previous.lower[::-1] - delta, 0.0)) / spec.beta
    # the construction is sequential: the new lower bound freezes the
    # competitor at the upper bound just computed, not the previous one
    lower = (gain - spec.c * (upper[::-1] + delta)) / spec.beta
    return BoundIterate(level=previous.level + 1, lower=lower, upper=upper, delta=float(delta))


def iterate_bounds(
    spec: StageStructuredSpec,
    delta0,
    schedule="fixed",
    max_n=200,
    tol=1e-10,
):
    """Run the bounding recursion and report its limit behaviour.

    schedule "fixed" keeps delta at delta0 on every level; "halving" uses
    delta0 / 2**n at level n, which lets both sequences reach the true
    equilibrium.  Stops when successive iterates move less than tol (or at
    max_n) and reports any monotonicity violation instead of asserting.
    """
    if schedule not in ("fixed", "halving"):
        raise ValueError("schedule must be 'fixed' or 'halving'")
    if max_n < 1:
        raise ValueError("max_n must be at least 1")
    _require_valid_delta(spec, delta0)

    kappa = spec.maturation_mass()
    gain = spec.alpha * kappa
    u_star, _ = stage_equilibrium(spec)

    def delta_at(level):
        if schedule == "fixed":
            return float(delta0)
        return float(delta0) * 0.5**level

    iterates = [first_bounds(spec, delta_at(1))]
    violations = 0
    for level in range(2, max_n + 1):
        prev = iterates[-1]
        cur = _next_level(spec, gain, prev, delta_at(level))
        if (cur.lower <= 0).any():
            raise BoundCollapseError(
                f"lower bound collapsed at level {level}; delta0={delta0} too large"
            )
        if (cur.lower < prev.lower - 1e-14).any() or (cur.upper > prev.upper + 1e-14).any():
            violations += 1
        iterates.append(cur)
        move = max(
            float(np.max(np.abs(cur.lower - prev.lower))),
            float(np.max(np.abs(cur.upper - prev.upper))),
        )
        if move <= tol:
            break

    last = iterates[-1]
    gap = float(np.max(last.upper - last.lower))
    eq_gap = max(
        float(np.max(np.abs(last.lower - u_star))), float(np.max(np.abs(last.upper - u_star)))
    )
    verdict = IterationVerdict(
        converged=len(iterates) < max_n,
        levels=len(iterates),
        gap=gap,
        limit_lower=last.lower,
        limit_upper=last.upper,
        equilibrium=u_star,
        equilibrium_gap=eq_gap,
        monotonicity_violations=violations,
    )
    return iterates, verdict


def write_iterates_csv(iterates, path):
    """Write `n,delta,l1,l2,u1,u2` rows with 17 significant digits."""
    with open(path, "w") as fh:
        fh.write("n,delta,l1,l2,u1,u2\n")
        for it in iterates:
            n, delta, l1, l2, u1, u2 = it.as_row()
            fh.write(
                f"{n},{delta:.17g},{l1:.17g},{l2:.17g},{u1:.17g},{u2:.17g}\n"
            )
