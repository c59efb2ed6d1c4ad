"""Histories over an unbounded past, memory weights, and delay kernels.

A trajectory's past is represented by a :class:`HistoryBuffer`: a closed-form
initial function on (-inf, 0] plus cubic dense-output segments on [0, t].
Delay kernels are nonnegative measures on [0, inf) built from point masses,
exponential densities, and damped uniform densities; all of their damped
masses have closed forms, which is what makes truncated quadrature against
an unbounded past controllable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

try:  # jitted segment evaluation; the numpy path below is equivalent
    from numba import njit
except ImportError:  # pragma: no cover
    njit = None

from .errors import NumericDomainError, OutOfRangeError

_TV_TOL = 1e-12


if njit is not None:

    @njit(cache=True)
    def _cubic_eval_jit(coef, n_seg, inv_step, step, times, out):
        last = n_seg - 1
        n = coef.shape[2]
        for i in range(times.shape[0]):
            t = times[i]
            idx = int(t * inv_step)
            if idx > last:
                idx = last
            u = t - idx * step
            for j in range(n):
                out[i, j] = (
                    (coef[idx, 3, j] * u + coef[idx, 2, j]) * u + coef[idx, 1, j]
                ) * u + coef[idx, 0, j]

else:  # pragma: no cover
    _cubic_eval_jit = None


@dataclass(frozen=True)
class WeightFunction:
    """Exponential memory weight w(s) = exp(-rate*s) for s <= 0.

    w(0) = 1 and w grows without bound into the past, so dividing by it
    discounts the distant history in the weighted supremum norm.
    """

    rate: float = 0.1

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("weight rate must be positive")

    def value(self, s):
        return np.exp(-self.rate * np.asarray(s, dtype=float))


# ---------------------------------------------------------------------------
# Delay kernels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DelayKernel:
    """Nonnegative measure on [0, inf) used for distributed delays.

    atoms:             (weight, delay) point masses, weight >= 0, delay >= 0.
    exp_densities:     (coeff, decay, damping) pieces contributing
                       coeff * decay * exp(-decay*s) * exp(-damping*s) ds.
    uniform_densities: (coeff, a, b, damping) pieces contributing
                       coeff / (b - a) * exp(-damping*s) ds on [a, b].

    The undamped total variation (damping factors dropped) is the sum of all
    weights and coefficients; a kernel flagged ``normalized`` must have
    undamped total variation 1.
    """

    atoms: tuple = ()
    exp_densities: tuple = ()
    uniform_densities: tuple = ()
    normalized: bool = False

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple(tuple(map(float, p)) for p in self.atoms))
        object.__setattr__(
            self, "exp_densities", tuple(tuple(map(float, p)) for p in self.exp_densities)
        )
        object.__setattr__(
            self, "uniform_densities", tuple(tuple(map(float, p)) for p in self.uniform_densities)
        )
        for w, tau in self.atoms:
            if w < 0 or tau < 0:
                raise ValueError("atom weights and delays must be nonnegative")
        for c, lam, gam in self.exp_densities:
            if c < 0 or gam < 0 or not lam > 0:
                raise ValueError("exponential density needs coeff >= 0, decay > 0, damping >= 0")
        for c, a, b, gam in self.uniform_densities:
            if c < 0 or gam < 0 or a < 0 or not a < b:
                raise ValueError("uniform density needs coeff >= 0, 0 <= a < b, damping >= 0")
        if self.normalized and abs(self.total_variation() - 1.0) > _TV_TOL:
            raise ValueError("kernel flagged normalized but undamped total variation is not 1")

    # -- constructors ------------------------------------------------------

    @classmethod
    def atom(cls, weight=1.0, delay=0.0, normalized=None):
        if normalized is None:
            normalized = abs(weight - 1.0) <= _TV_TOL
        return cls(atoms=((weight, delay),), normalized=normalized)

    @classmethod
    def exponential(cls, decay=1.0, coeff=1.0, damping=0.0, normalized=None):
        if normalized is None:
            normalized = abs(coeff - 1.0) <= _TV_TOL
        return cls(exp_densities=((coeff, decay, damping),), normalized=normalized)

    @classmethod
    def uniform(cls, a, b, coeff=1.0, damping=0.0, normalized=None):
        if normalized is None:
            normalized = abs(coeff - 1.0) <= _TV_TOL
        return cls(uniform_densities=((coeff, a, b, damping),), normalized=normalized)

    # -- closed forms ------------------------------------------------------

    def total_variation(self):
        """Undamped total variation: all damping factors treated as zero."""
        return (
            sum(w for w, _ in self.atoms)
            + sum(c for c, _, _ in self.exp_densities)
            + sum(c for c, _, _, _ in self.uniform_densities)
        )

    def weighted_mass(self, extra_damping=0.0):
        """Closed-form integral of exp(-extra_damping * s) against the kernel."""
        if extra_damping < 0:
            raise ValueError("extra damping must be nonnegative")
        g = float(extra_damping)
        total = sum(w * math.exp(-g * tau) for w, tau in self.atoms)
        for c, lam, gam in self.exp_densities:
            total += c * lam / (lam + gam + g)
        for c, a, b, gam in self.uniform_densities:
            x = gam + g
            if x * (b - a) < 1e-14:
                total += c * math.exp(-x * a)
            else:
                total += c * math.exp(-x * a) * (-math.expm1(-x * (b - a))) / (x * (b - a))
        return total

    def damped(self, extra):
        """Kernel for s -> exp(-extra*s) d(self)(s); atom weights absorb the factor."""
        if extra == 0:
            return self
        atoms = tuple((w * math.exp(-extra * tau), tau) for w, tau in self.atoms)
        exps = tuple((c, lam, gam + extra) for c, lam, gam in self.exp_densities)
        unis = tuple((c, a, b, gam + extra) for c, a, b, gam in self.uniform_densities)
        # folding damping into atom weights changes the undamped variation
        still_normalized = self.normalized and not self.atoms
        return DelayKernel(atoms, exps, unis, normalized=still_normalized)


def kernel_weighted_mass(kernel: DelayKernel, extra_damping=0.0) -> float:
    return kernel.weighted_mass(extra_damping)


# ---------------------------------------------------------------------------
# Initial functions (the pre-zero part of a history)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstantProfile:
    """phi(s) = level for all s."""

    level: float

    def values(self, s):
        return np.full(np.shape(np.asarray(s, dtype=float)), float(self.level))

    def sup(self):
        return abs(self.level)

    def is_positive(self):
        return self.level > 0

    def exp_tail_coeffs(self):
        # representation p0 + p1*exp(rho*s) with p1 = 0
        return (float(self.level), 0.0, 1.0)

    def to_dict(self):
        return {"type": "constant", "value": self.level}


@dataclass(frozen=True)
class SineProfile:
    """phi(s) = base + amplitude*sin(omega*s); positive when base > amplitude >= 0."""

    base: float
    amplitude: float
    omega: float

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("amplitude must be nonnegative")

    def values(self, s):
        s = np.asarray(s, dtype=float)
        return self.base + self.amplitude * np.sin(self.omega * s)

    def sup(self):
        return abs(self.base) + self.amplitude

    def is_positive(self):
        return self.base - self.amplitude > 0

    def exp_tail_coeffs(self):
        return None

    def to_dict(self):
        return {
            "type": "sine",
            "base": self.base,
            "amplitude": self.amplitude,
            "omega": self.omega,
        }


@dataclass(frozen=True)
class ExpApproachProfile:
    """phi(s) = limit + (start - limit)*exp(rate*s): equals start at s = 0 and
    approaches limit toward the distant past."""

    limit: float
    start: float
    rate: float

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("approach rate must be positive")

    def values(self, s):
        s = np.asarray(s, dtype=float)
        return self.limit + (self.start - self.limit) * np.exp(self.rate * s)

    def sup(self):
        return max(abs(self.limit), abs(self.start))

    def is_positive(self):
        # values are strictly positive for every finite s (the limit itself
        # may be zero without being attained)
        return self.start > 0 and self.limit >= 0

    def exp_tail_coeffs(self):
        return (float(self.limit), float(self.start - self.limit), float(self.rate))

    def to_dict(self):
        return {
            "type": "exp_approach",
            "limit": self.limit,
            "start": self.start,
            "rate": self.rate,
        }


class InitialHistory:
    """Vector-valued initial function assembled from per-component profiles."""

    def __init__(self, profiles):
        self.profiles = tuple(profiles)
        if not self.profiles:
            raise ValueError("need at least one component profile")
        self.n = len(self.profiles)

    # -- constructors ------------------------------------------------------

    @classmethod
    def constant(cls, values):
        return cls([ConstantProfile(float(v)) for v in np.atleast_1d(values)])

    @classmethod
    def sine(cls, base, amplitude, omega):
        base = np.atleast_1d(np.asarray(base, dtype=float))
        amp = np.broadcast_to(np.asarray(amplitude, dtype=float), base.shape)
        return cls([SineProfile(b, a, float(omega)) for b, a in zip(base, amp)])

    @classmethod
    def exp_approach(cls, limit, start, rate):
        limit = np.atleast_1d(np.asarray(limit, dtype=float))
        start = np.broadcast_to(np.asarray(start, dtype=float), limit.shape)
        return cls([ExpApproachProfile(l, s, float(rate)) for l, s in zip(limit, start)])

    # -- evaluation --------------------------------------------------------

    def values_matrix(self, times):
        times = np.asarray(times, dtype=float)
        return np.column_stack([p.values(times) for p in self.profiles])

    def value_at(self, s):
        return np.array([p.values(s) for p in self.profiles], dtype=float)

    def sup(self):
        return max(p.sup() for p in self.profiles)

    def is_strictly_positive(self):
        return all(p.is_positive() for p in self.profiles)

    def exp_tail_coeffs(self, component):
        return self.profiles[component].exp_tail_coeffs()

    def to_list(self):
        return [p.to_dict() for p in self.profiles]


# ---------------------------------------------------------------------------
# History buffer: initial function + cubic dense-output segments
# ---------------------------------------------------------------------------


class HistoryBuffer:
    """Full past of a trajectory, evaluable at any time <= frontier.

    Segments cover [0, frontier] on a fixed grid of width ``step``; each is a
    cubic per component matching endpoint values and derivatives, so junctions
    are continuous by construction.  The buffer is written by one integrator
    and read-only afterwards.
    """

    def __init__(self, initial: InitialHistory, step=0.01, capacity=0):
        if not step > 0:
            raise ValueError("step must be positive")
        self.initial = initial
        self.n = initial.n
        self.step = float(step)
        self._inv_step = 1.0 / self.step
        # cubic coefficients per segment, laid out (segment, power, component)
        self._coef = np.zeros((max(int(capacity), 0), 4, self.n))
        self._n_seg = 0
        self._sup = float(initial.sup())

    @property
    def frontier(self):
        return self._n_seg * self.step

    @property
    def n_segments(self):
        return self._n_seg

    def sup_bound(self):
        """Upper bound for sup |x| over the whole past (endpoint-based)."""
        return self._sup

    def append_segment(self, y0, f0, y1, f1):
        """Add the cubic for the next step from endpoint values/derivatives."""
        if self._n_seg >= self._coef.shape[0]:
            grown = np.zeros((max(2 * self._coef.shape[0], 64), 4, self.n))
            grown[: self._n_seg] = self._coef[: self._n_seg]
            self._coef = grown
        h = self.step
        d = y1 - y0
        c = self._coef[self._n_seg]
        c[0] = y0
        c[1] = f0
        c[2] = (3.0 * d - (2.0 * f0 + f1) * h) / (h * h)
        c[3] = (-2.0 * d + (f0 + f1) * h) / (h * h * h)
        self._n_seg += 1
        self._sup = max(self._sup, float(np.max(np.abs(y1))))

    def _eval_segments(self, tf):
        if _cubic_eval_jit is not None:
            out = np.empty((tf.shape[0], self.n))
            _cubic_eval_jit(self._coef, self._n_seg, self._inv_step, self.step, tf, out)
            return out
        idx = (tf * self._inv_step).astype(np.int64)
        np.minimum(idx, self._n_seg - 1, out=idx)
        u = (tf - idx * self.step)[:, None]
        c = self._coef[idx]
        out = c[:, 3] * u
        out += c[:, 2]
        out *= u
        out += c[:, 1]
        out *= u
        out += c[:, 0]
        return out

    def eval_matrix(self, times, state_time=None, state=None):
        """Values at an array of times, shape (len(times), n).

        Times beyond the frontier extrapolate the last segment (the
        integrator relies on this inside a step); ``state`` overrides the
        result at exactly ``state_time`` with the current stage value.
        """
        times = np.atleast_1d(np.asarray(times, dtype=float))
        if self._n_seg == 0:
            out = self.initial.values_matrix(times)
        else:
            past = times <= 0.0
            if not past.any():
                out = self._eval_segments(times)
            else:
                out = np.empty((times.size, self.n))
                out[past] = self.initial.values_matrix(times[past])
                fwd = ~past
                if fwd.any():
                    out[fwd] = self._eval_segments(times[fwd])
        if state is not None:
            hit = times == state_time
            if hit.any():
                out[hit] = state
        return out

    def eval_at(self, t):
        return self.eval_matrix(np.array([float(t)]))[0]

    def junction_residual(self):
        """Largest mismatch between consecutive segments at shared junctions."""
        if self._n_seg < 2:
            return 0.0
        h = self.step
        c = self._coef[: self._n_seg - 1]
        right = ((c[:, 3] * h + c[:, 2]) * h + c[:, 1]) * h + c[:, 0]
        left = self._coef[1 : self._n_seg, 0]
        return float(np.max(np.abs(right - left)))


def history_eval(buffer, t_query):
    """Value of the history at a single past time; errors beyond the frontier."""
    t = float(t_query)
    frontier = buffer.frontier
    if t > frontier + 1e-12 * max(1.0, abs(frontier)):
        raise OutOfRangeError(f"query time {t} is beyond the frontier {frontier}")
    return buffer.eval_matrix(np.array([min(t, frontier)]))[0]


# ---------------------------------------------------------------------------
# Quadrature of kernels against histories
# ---------------------------------------------------------------------------


class _QuadPlan:
    __slots__ = ("nodes", "weights", "exp_tails")

    def __init__(self, nodes, weights, exp_tails):
        self.nodes = nodes
        self.weights = weights
        self.exp_tails = exp_tails


_PLAN_CACHE: dict = {}
_MAX_NODES = 4_000_000


def _simpson_weights(m, spacing):
    w = np.full(m + 1, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return w * (spacing / 3.0)


def _sup_bucket(sup_bound):
    # quantize the sup bound so plans can be cached while the bound drifts
    if sup_bound <= 0:
        return 0.0
    return 2.0 ** math.ceil(math.log2(sup_bound))

def _panel_cap(scale, mu, bound, tail_tol, step):
    """Spacing keeping the composite-Simpson error of scale*exp(-mu*s)*x(t-s)
    safely below tail_tol (fourth-derivative estimate, factor-10 margin)."""
    if mu <= 0 or scale <= 0 or bound <= 0:
        return step
    cap = (18.0 * tail_tol / (scale * mu**3 * bound)) ** 0.25
    return min(step, max(cap, step / 64.0))


def _quadrature_plan(kernel, sup_bound, tail_tol, step):
    bound = _sup_bucket(sup_bound)
    key = (kernel, bound, tail_tol, step)
    plan = _PLAN_CACHE.get(key)
    if plan is not None:
        return plan

    nodes, weights, exp_tails = [], [], []
    live_exp = [p for p in kernel.exp_densities if p[0] > 0]
    budget = tail_tol / max(1, len(live_exp))

    for c, lam, gam in live_exp:
        mu = lam + gam
        scale = c * lam
        # truncate where the neglected damped mass times the sup bound
        # drops below the budget
        if bound > 0:
            cut = math.log(scale * bound / (mu * budget)) / mu
        else:
            cut = 0.0
        if cut > 0:
            spacing = _panel_cap(scale, mu, bound, tail_tol, step)
            m = 2 * max(1, math.ceil(cut / (2 * spacing)))
            if m > _MAX_NODES:
                raise NumericDomainError("kernel tail not resolvable at the requested tolerance")
            cut = m * (cut / m)
            s = np.linspace(0.0, cut, m + 1)
            nodes.append(s)
            weights.append(_simpson_weights(m, cut / m) * scale * np.exp(-mu * s))
        else:
            cut = 0.0
        exp_tails.append((scale, mu, cut))

    for c, a, b, gam in kernel.uniform_densities:
        if c <= 0:
            continue
        spacing = _panel_cap(c / (b - a), gam, bound, tail_tol, step) if gam > 0 else step
        m = 2 * max(1, math.ceil((b - a) / (2 * spacing)))
        if m > _MAX_NODES:
            raise NumericDomainError("uniform kernel support not resolvable")
        s = np.linspace(a, b, m + 1)
        nodes.append(s)
        weights.append(_simpson_weights(m, (b - a) / m) * (c / (b - a)) * np.exp(-gam * s))

    for w, tau in kernel.atoms:
        if w > 0:
            nodes.append(np.array([tau]))
            weights.append(np.array([w]))

    if nodes:
        nodes = np.concatenate(nodes)
        weights = np.concatenate(weights)
    else:
        nodes = np.empty(0)
        weights = np.empty(0)
    plan = _QuadPlan(nodes, weights, tuple(exp_tails))
    if len(_PLAN_CACHE) > 512:
        _PLAN_CACHE.clear()
    _PLAN_CACHE[key] = plan
    return plan


def convolve_components(kernel, history, t, components, tail_tol=1e-8, state_time=None, state=None):
    """Integrals of x_j(t - s) against the kernel for each j in components.

    Densities use composite Simpson on truncated grids; atoms are exact; the
    truncated exponential tail is added in closed form whenever it lies
    entirely in the initial part and the component's profile has a
    closed-form damped integral (otherwise it is below tail_tol by
    construction).  Returns a dict component -> value.
    """
    bound = history.sup_bound()
    if not math.isfinite(bound):
        raise NumericDomainError("history has no finite sup bound; tail not resolvable")
    plan = _quadrature_plan(kernel, bound, tail_tol, history.step)
    out = {}
    if plan.nodes.size:
        vals = history.eval_matrix(t - plan.nodes, state_time=state_time, state=state)
        for j in components:
            v = float(plan.weights @ vals[:, j])
            # NaN/inf anywhere in the history propagates through the dot
            if not math.isfinite(v):
                raise NumericDomainError("history evaluation produced non-finite values")
            out[j] = v
    else:
        for j in components:
            out[j] = 0.0
    for scale, mu, cut in plan.exp_tails:
        if t <= cut:
            # the neglected region (cut, inf) maps into the initial part
            for j in components:
                coeffs = history.initial.exp_tail_coeffs(j)
                if coeffs is None:
                    continue
                p0, p1, rho = coeffs
                tail = p0 * math.exp(-mu * cut) / mu
                tail += p1 * math.exp(rho * (t - cut) - mu * cut) / (mu + rho)
                out[j] += scale * tail
    return out


def kernel_convolve(kernel, buffer, t, component, tail_tol=1e-8):
    """Integral of x_component(t - s) against the kernel."""
    return convolve_components(kernel, buffer, t, (component,), tail_tol)[component]


# ---------------------------------------------------------------------------
# Weighted norm
# ---------------------------------------------------------------------------


def weighted_norm(history, weight=None, sample_step=0.01, t=None):
    """Weighted supremum norm of the history segment ending at time t.

    Computed as the max of |x(s)|_inf / w(s - t) over a backward sample grid;
    the scan stops once the weight alone caps the remaining ratios below the
    running maximum, which is valid because the history is bounded.  Exact
    for histories whose maximum ratio sits on the grid (e.g. constant tails,
    whose ratio peaks at s = t or the junction s = 0).
    """
    if weight is None:
        weight = WeightFunction()
    if not sample_step > 0:
        raise ValueError("sample_step must be positive")
    if t is None:
        t = history.frontier
    bound = history.sup_bound()
    if not math.isfinite(bound):
        raise NumericDomainError("history has no finite sup bound")
    if bound == 0:
        return 0.0

    best = 0.0
    chunk = 512
    k0 = 0
    while True:
        s = t - (k0 + np.arange(chunk)) * sample_step
        if k0 == 0 and t > 0:
            # make sure the initial-function junction is on the grid
            s = np.unique(np.concatenate([s, [0.0]]))[::-1]
        vals = history.eval_matrix(s)
        if not np.all(np.isfinite(vals)):
            raise NumericDomainError("history evaluation produced non-finite values")
        ratio = np.max(np.abs(vals), axis=1) / weight.value(s - t)
        best = max(best, float(np.max(ratio)))
        # beyond depth d the ratio is at most bound / w(-d) < best
        depth_needed = math.log(bound / best) / weight.rate if best > 0 else math.inf
        k0 += chunk
        if (k0 - 1) * sample_step > depth_needed:
            return best
