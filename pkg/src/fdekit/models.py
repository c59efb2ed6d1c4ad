"""Concrete model classes with right-hand sides in gain/loss form.

Every model evaluates as x_i'(t) = F_i(t, x_t) - x_i(t) * G_i(t, x_t), where
F collects birth/dispersal gains and G collects per-capita losses.  The
split is exposed through :func:`rhs_parts` because order-preservation and
positivity arguments act on the two parts separately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolationError
from .fading_memory import (
    ConstantProfile,
    DelayKernel,
    ExpApproachProfile,
    HistoryBuffer,
    InitialHistory,
    SineProfile,
    convolve_components,
)

PROBE_TOL = 1e-10


# ---------------------------------------------------------------------------
# Bounded time-varying coefficients and delays
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TimeCoefficient:
    """c0 + c1 * sin(omega*t + theta); constant when c1 or omega vanishes."""

    c0: float
    c1: float = 0.0
    omega: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        if self.c1 < 0:
            raise ValueError("sinusoid amplitude must be nonnegative")

    @classmethod
    def constant(cls, value):
        return cls(float(value))

    def value(self, t):
        if self.c1 == 0.0:
            return self.c0
        return self.c0 + self.c1 * math.sin(self.omega * t + self.theta)

    def bounds(self):
        """Closed-form (inf, sup) over t >= 0."""
        if self.c1 == 0.0 or self.omega == 0.0:
            v = self.c0 + self.c1 * math.sin(self.theta)
            return (v, v)
        return (self.c0 - self.c1, self.c0 + self.c1)

    def is_constant(self):
        lo, hi = self.bounds()
        return lo == hi

    def scaled(self, factor):
        return TimeCoefficient(self.c0 * factor, self.c1 * factor, self.omega, self.theta)

    def to_json(self):
        if self.c1 == 0.0:
            return self.c0
        return {"c0": self.c0, "c1": self.c1, "omega": self.omega, "theta": self.theta}


def coefficient_bounds(coeff: TimeCoefficient):
    return coeff.bounds()


def _as_coeff(value) -> TimeCoefficient:
    if isinstance(value, TimeCoefficient):
        return value
    return TimeCoefficient.constant(value)


@dataclass(frozen=True)
class DelayFunction:
    """Nonnegative time-dependent lag tau(t).

    kinds: "constant" tau0; "sinusoid" tau0 + tau1*sin(omega*t) with
    tau0 >= tau1 >= 0; "proportional" rho*t with rho in [0, 1), which is
    unbounded yet leaves t - tau(t) = (1 - rho)*t escaping to infinity.
    """

    kind: str = "constant"
    tau0: float = 0.0
    tau1: float = 0.0
    omega: float = 0.0
    rho: float = 0.0

    def __post_init__(self):
        if self.kind == "constant":
            if self.tau0 < 0:
                raise ValueError("constant delay must be nonnegative")
        elif self.kind == "sinusoid":
            if not (self.tau0 >= self.tau1 >= 0):
                raise ValueError("sinusoid delay needs tau0 >= tau1 >= 0")
        elif self.kind == "proportional":
            if not (0.0 <= self.rho < 1.0):
                raise ValueError("proportional delay needs rho in [0, 1)")
        else:
            raise ValueError(f"unknown delay kind {self.kind!r}")

    @classmethod
    def constant(cls, tau):
        return cls("constant", tau0=float(tau))

    @classmethod
    def sinusoid(cls, tau0, tau1, omega):
        return cls("sinusoid", tau0=float(tau0), tau1=float(tau1), omega=float(omega))

    @classmethod
    def proportional(cls, rho):
        return cls("proportional", rho=float(rho))

    def value(self, t):
        if self.kind == "constant":
            return self.tau0
        if self.kind == "sinusoid":
            return self.tau0 + self.tau1 * math.sin(self.omega * t)
        return self.rho * t

    @property
    def escaping(self):
        # every shipped family has t - tau(t) -> infinity
        return True

    def to_json(self):
        if self.kind == "constant":
            return self.tau0
        if self.kind == "sinusoid":
            return {"type": "sinusoid", "tau0": self.tau0, "tau1": self.tau1, "omega": self.omega}
        return {"type": "proportional", "rho": self.rho}


def _as_delay(value) -> DelayFunction:
    if isinstance(value, DelayFunction):
        return value
    return DelayFunction.constant(value)


# ---------------------------------------------------------------------------
# Model specifications
# ---------------------------------------------------------------------------


def _kernel_grid(kernels, n, what):
    grid = tuple(tuple(row) for row in kernels)
    if len(grid) != n or any(len(row) != n for row in grid):
        raise ValueError(f"{what} kernel grid must be {n}x{n}")
    for row in grid:
        for k in row:
            if not isinstance(k, DelayKernel):
                raise TypeError(f"{what} entries must be DelayKernel instances")
            if not k.normalized:
                raise ValueError(f"{what} kernels must be normalized (total variation 1)")
    return grid


def same_kernel(kernel: DelayKernel, n: int):
    """n x n grid holding the same kernel in every slot."""
    return tuple(tuple(kernel for _ in range(n)) for _ in range(n))


@dataclass
class CooperativeLVSpec:
    """Patch-structured Lotka-Volterra system with distributed delays:

        x_i' = x_i * (beta_i - mu_i x_i + sum_j a_ij (eta_ij * x_j))
               + sum_j d_ij (nu_ij * x_j)

    with a, d >= 0 (cooperative coupling) and normalized kernels eta, nu.
    """

    beta: np.ndarray
    mu: np.ndarray
    a: np.ndarray
    d: np.ndarray
    eta: tuple
    nu: tuple

    def __post_init__(self):
        self.beta = np.atleast_1d(np.asarray(self.beta, dtype=float))
        self.mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        n = self.beta.size
        self.a = np.asarray(self.a, dtype=float).reshape(n, n)
        self.d = np.asarray(self.d, dtype=float).reshape(n, n)
        if self.mu.size != n:
            raise ValueError("beta and mu must have the same length")
        if (self.a < 0).any() or (self.d < 0).any():
            raise ValueError("coupling matrices a and d must be nonnegative")
        if np.diagonal(self.d).any():
            raise ValueError("self-dispersal d_ii must be zero")
        self.eta = _kernel_grid(self.eta, n, "eta")
        self.nu = _kernel_grid(self.nu, n, "nu")

    @property
    def n(self):
        return self.beta.size


@dataclass
class NonautLVSpec:
    """Time-varying version of :class:`CooperativeLVSpec`: every scalar
    coefficient is a bounded TimeCoefficient, kernels stay static."""

    beta: tuple
    mu: tuple
    a: tuple
    d: tuple
    eta: tuple
    nu: tuple

    def __post_init__(self):
        self.beta = tuple(_as_coeff(c) for c in self.beta)
        self.mu = tuple(_as_coeff(c) for c in self.mu)
        n = len(self.beta)
        if len(self.mu) != n:
            raise ValueError("beta and mu must have the same length")
        self.a = tuple(tuple(_as_coeff(c) for c in row) for row in self.a)
        self.d = tuple(tuple(_as_coeff(c) for c in row) for row in self.d)
        if len(self.a) != n or len(self.d) != n:
            raise ValueError("a and d must be n x n")
        for i in range(n):
            for j in range(n):
                if self.a[i][j].bounds()[0] < 0 or self.d[i][j].bounds()[0] < 0:
                    raise ValueError("a_ij(t) and d_ij(t) must be nonnegative for all t")
            if self.d[i][i].bounds()[1] != 0:
                raise ValueError("self-dispersal d_ii(t) must be identically zero")
        self.eta = _kernel_grid(self.eta, n, "eta")
        self.nu = _kernel_grid(self.nu, n, "nu")

    @property
    def n(self):
        return len(self.beta)


@dataclass
class LogisticNetSpec:
    """Network of saturating-growth logistic classes with dispersal:

        x_i' = sum_k alpha_ik(t) x_i(t - tau_ik(t)) / (1 + beta_ik(t) x_i(t - tau_ik(t)))
               + sum_j d_ij(t) x_j(t - sigma_ij(t)) - mu_i(t) x_i - kappa_i(t) x_i^2

    Delays may be unbounded as long as t - tau(t) escapes to infinity.
    """

    alpha: tuple  # alpha[i] = tuple of TimeCoefficient, one per growth term
    beta: tuple  # matching saturation coefficients
    tau: tuple  # matching delay functions
    d: tuple  # n x n dispersal TimeCoefficients, zero diagonal
    sigma: tuple  # n x n dispersal delay functions
    mu: tuple
    kappa: tuple

    def __post_init__(self):
        self.alpha = tuple(tuple(_as_coeff(c) for c in row) for row in self.alpha)
        self.beta = tuple(tuple(_as_coeff(c) for c in row) for row in self.beta)
        self.tau = tuple(tuple(_as_delay(v) for v in row) for row in self.tau)
        n = len(self.alpha)
        self.mu = tuple(_as_coeff(c) for c in self.mu)
        self.kappa = tuple(_as_coeff(c) for c in self.kappa)
        self.d = tuple(tuple(_as_coeff(c) for c in row) for row in self.d)
        self.sigma = tuple(tuple(_as_delay(v) for v in row) for row in self.sigma)
        if not (len(self.beta) == len(self.tau) == n) or len(self.mu) != n or len(self.kappa) != n:
            raise ValueError("per-class lists must all have length n")
        for i in range(n):
            if not (len(self.alpha[i]) == len(self.beta[i]) == len(self.tau[i])):
                raise ValueError("alpha, beta, tau must align per class")
            for c in self.alpha[i] + self.beta[i] + (self.mu[i],):
                if c.bounds()[0] < 0:
                    raise ValueError("rates must be nonnegative for all t")
            if sum(c.bounds()[0] for c in self.alpha[i]) <= 0:
                raise ValueError("total growth rate must be bounded below by a positive constant")
            if self.kappa[i].bounds()[0] <= 0:
                raise ValueError("kappa must be bounded below by a positive constant")
            if self.d[i][i].bounds()[1] != 0:
                raise ValueError("self-dispersal d_ii(t) must be identically zero")
            for j in range(n):
                if self.d[i][j].bounds()[0] < 0:
                    raise ValueError("dispersal rates must be nonnegative")

    @property
    def n(self):
        return len(self.alpha)

    def scaled(self, v):
        """Spec for the componentwise rescaled state x_i / v_i."""
        v = np.asarray(v, dtype=float)
        n = self.n
        return LogisticNetSpec(
            alpha=self.alpha,
            beta=tuple(
                tuple(c.scaled(v[i]) for c in self.beta[i]) for i in range(n)
            ),
            tau=self.tau,
            d=tuple(
                tuple(self.d[i][j].scaled(v[j] / v[i]) for j in range(n)) for i in range(n)
            ),
            sigma=self.sigma,
            mu=self.mu,
            kappa=tuple(self.kappa[i].scaled(v[i]) for i in range(n)),
        )


@dataclass
class StageStructuredSpec:
    """Two competing species, each split into immature and mature stages;
    only the mature densities evolve autonomously:

        u_j' = alpha_j * integral f_j(s) exp(-gamma_j s) u_j(t - s) ds
               - beta_j u_j^2 - c_j u_1 u_2

    The kernels f_j are normalized and undamped; the maturation survival
    damping exp(-gamma_j s) is applied on top of them.  c_1 = c_2 = 0 is the
    decoupled single-species case.
    """

    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    c: np.ndarray
    kernels: tuple  # (f_1, f_2), normalized, undamped

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=float).reshape(2)
        self.beta = np.asarray(self.beta, dtype=float).reshape(2)
        self.gamma = np.asarray(self.gamma, dtype=float).reshape(2)
        self.c = np.asarray(self.c, dtype=float).reshape(2)
        if (self.alpha <= 0).any() or (self.beta <= 0).any() or (self.gamma <= 0).any():
            raise ValueError("alpha, beta, gamma must be positive")
        if (self.c < 0).any():
            raise ValueError("competition rates must be nonnegative")
        self.kernels = tuple(self.kernels)
        if len(self.kernels) != 2:
            raise ValueError("need one kernel per species")
        for k in self.kernels:
            if not k.normalized:
                raise ValueError("maturation kernels must be normalized")
            for _, _, gam in k.exp_densities:
                if gam != 0:
                    raise ValueError("maturation kernels must be undamped")
            for _, _, _, gam in k.uniform_densities:
                if gam != 0:
                    raise ValueError("maturation kernels must be undamped")
        # survival-damped kernels actually convolved against the history
        self._damped = tuple(
            self.kernels[j].damped(float(self.gamma[j])) for j in range(2)
        )

    @property
    def n(self):
        return 2

    def maturation_mass(self):
        """kappa_j = integral f_j(s) exp(-gamma_j s) ds, one per species."""
        return np.array([k.weighted_mass(0.0) for k in self._damped])


ModelSpec = (CooperativeLVSpec, NonautLVSpec, LogisticNetSpec, StageStructuredSpec)


# ---------------------------------------------------------------------------
# Right-hand sides
# ---------------------------------------------------------------------------


def _grouped_convolutions(pairs, history, t, tail_tol, state):
    """Evaluate convolutions for (kernel, component) pairs, sharing the
    quadrature grid and history evaluation between equal kernels."""
    needed = {}
    for kernel, j in pairs:
        needed.setdefault(kernel, set()).add(j)
    out = {}
    for kernel, comps in needed.items():
        vals = convolve_components(
            kernel, history, t, sorted(comps), tail_tol, state_time=t, state=state
        )
        for j, v in vals.items():
            out[(kernel, j)] = v
    return out


def _current_state(history, t, state):
    if state is not None:
        return np.asarray(state, dtype=float)
    return history.eval_matrix(np.array([t]))[0]


def _lv_parts(spec, t, history, tail_tol, state, autonomous):
    n = spec.n
    y = _current_state(history, t, state)
    if autonomous:
        beta = spec.beta
        mu = spec.mu
        a = spec.a
        d = spec.d
    else:
        beta = np.array([c.value(t) for c in spec.beta])
        mu = np.array([c.value(t) for c in spec.mu])
        a = np.array([[c.value(t) for c in row] for row in spec.a])
        d = np.array([[c.value(t) for c in row] for row in spec.d])
    pairs = []
    for i in range(n):
        for j in range(n):
            if a[i, j] != 0.0:
                pairs.append((spec.eta[i][j], j))
            if d[i, j] != 0.0:
                pairs.append((spec.nu[i][j], j))
    conv = _grouped_convolutions(pairs, history, t, tail_tol, state)
    gain = beta * y
    loss = mu * y
    for i in range(n):
        for j in range(n):
            if d[i, j] != 0.0:
                gain[i] += d[i, j] * conv[(spec.nu[i][j], j)]
            if a[i, j] != 0.0:
                loss[i] -= a[i, j] * conv[(spec.eta[i][j], j)]
    return gain, loss, y


def _logistic_parts(spec, t, history, tail_tol, state):
    n = spec.n
    y = _current_state(history, t, state)
    # gather every discrete-delay evaluation in one call
    times = []
    for i in range(n):
        for tau in spec.tau[i]:
            times.append(t - tau.value(t))
        for j in range(n):
            times.append(t - spec.sigma[i][j].value(t))
    times = np.asarray(times, dtype=float)
    vals = history.eval_matrix(times, state_time=t, state=state)
    gain = np.zeros(n)
    pos = 0
    for i in range(n):
        for k, alpha in enumerate(spec.alpha[i]):
            xd = vals[pos, i]
            pos += 1
            gain[i] += alpha.value(t) * xd / (1.0 + spec.beta[i][k].value(t) * xd)
        for j in range(n):
            xd = vals[pos, j]
            pos += 1
            dij = spec.d[i][j].value(t)
            if dij != 0.0:
                gain[i] += dij * xd
    loss = np.array([spec.mu[i].value(t) + spec.kappa[i].value(t) * y[i] for i in range(n)])
    return gain, loss, y


def _stage_parts(spec, t, history, tail_tol, state):
    y = _current_state(history, t, state)
    pairs = [(spec._damped[0], 0), (spec._damped[1], 1)]
    conv = _grouped_convolutions(pairs, history, t, tail_tol, state)
    gain = np.array(
        [spec.alpha[0] * conv[(spec._damped[0], 0)], spec.alpha[1] * conv[(spec._damped[1], 1)]]
    )
    loss = np.array(
        [spec.beta[0] * y[0] + spec.c[0] * y[1], spec.beta[1] * y[1] + spec.c[1] * y[0]]
    )
    return gain, loss, y


def rhs_parts(model, t, history, tail_tol=1e-8, state=None):
    """Gain part F(t, x_t), per-capita loss part G(t, x_t), and x(t).

    The derivative is gain - x * loss.  ``state`` supplies the value of x at
    exactly time t (used by integrator stages before the step is committed);
    otherwise the history itself is evaluated at t.
    """
    if isinstance(model, CooperativeLVSpec):
        return _lv_parts(model, t, history, tail_tol, state, autonomous=True)
    if isinstance(model, NonautLVSpec):
        return _lv_parts(model, t, history, tail_tol, state, autonomous=False)
    if isinstance(model, LogisticNetSpec):
        return _logistic_parts(model, t, history, tail_tol, state)
    if isinstance(model, StageStructuredSpec):
        return _stage_parts(model, t, history, tail_tol, state)
    raise TypeError(f"unsupported model type {type(model).__name__}")


def rhs(model, t, buffer, tail_tol=1e-8, state=None):
    """Time derivative of the model at time t against the given history."""
    gain, loss, y = rhs_parts(model, t, buffer, tail_tol, state)
    return gain - y * loss


# ---------------------------------------------------------------------------
# Quasimonotonicity probe
# ---------------------------------------------------------------------------


@dataclass
class ProbeReport:
    """Outcome of random order-preservation sampling; statistical evidence
    only, never a proof."""

    passed: bool
    n_pairs: int
    witness: dict | None = None


def _random_profile(rng, allow_sine=True):
    kind = rng.integers(0, 3 if allow_sine else 2)
    if kind == 0:
        return ConstantProfile(float(rng.uniform(0.2, 2.0)))
    if kind == 1 or not allow_sine:
        lo = float(rng.uniform(0.2, 2.0))
        hi = lo + float(rng.uniform(0.0, 1.0))
        return ExpApproachProfile(limit=hi, start=lo, rate=float(rng.uniform(0.3, 2.0)))
    base = float(rng.uniform(0.5, 2.0))
    amp = float(rng.uniform(0.0, 0.8)) * base
    return SineProfile(base, amp, float(rng.uniform(0.3, 3.0)))


def _raised_profile(profile, bump):
    """Profile shifted up by a constant bump >= 0 (stays in the family)."""
    if isinstance(profile, ConstantProfile):
        return ConstantProfile(profile.level + bump)
    if isinstance(profile, SineProfile):
        return SineProfile(profile.base + bump, profile.amplitude, profile.omega)
    return ExpApproachProfile(profile.limit + bump, profile.start + bump, profile.rate)


def _raised_past_only(profile, bump):
    """Profile raised by bump*(1 - exp(rate*s)): above the original for s < 0
    but equal at s = 0.  Needs a constant or exponential-approach base."""
    if isinstance(profile, ConstantProfile):
        return ExpApproachProfile(limit=profile.level + bump, start=profile.level, rate=1.0)
    if isinstance(profile, ExpApproachProfile):
        return ExpApproachProfile(profile.limit + bump, profile.start, profile.rate)
    raise ValueError("past-only bump needs a constant or exponential-approach profile")


def quasimonotone_probe(model, n_pairs=500, seed=0, tail_tol=1e-12, bump_scale=0.5):
    """Sample ordered history pairs and test order preservation of the
    derivative functional.

    Draws pairs phi <= psi agreeing in component i at time 0 and flags a
    witness when f_i(phi) exceeds f_i(psi) beyond quadrature noise.  With
    ``bump_scale`` zero the pairs collapse to phi = psi and the probe must
    pass trivially.
    """
    if n_pairs < 1:
        raise ValueError("need at least one pair")
    rng = np.random.default_rng(seed)
    n = model.n
    for _ in range(n_pairs):
        i = int(rng.integers(0, n))
        low = []
        high = []
        for j in range(n):
            p = _random_profile(rng, allow_sine=(j != i))
            if j == i:
                bump = float(rng.uniform(0.1, 1.0)) * bump_scale
                low.append(p)
                high.append(_raised_past_only(p, bump) if bump > 0 else p)
            else:
                bump = float(rng.uniform(0.0, 1.0)) * bump_scale
                low.append(p)
                high.append(_raised_profile(p, bump) if bump > 0 else p)
        hist_low = HistoryBuffer(InitialHistory(low))
        hist_high = HistoryBuffer(InitialHistory(high))
        f_low = rhs(model, 0.0, hist_low, tail_tol)[i]
        f_high = rhs(model, 0.0, hist_high, tail_tol)[i]
        if f_low > f_high + PROBE_TOL:
            witness = {
                "component": i,
                "low": [p.to_dict() for p in low],
                "high": [p.to_dict() for p in high],
                "f_low": float(f_low),
                "f_high": float(f_high),
                "gap": float(f_low - f_high),
            }
            return ProbeReport(passed=False, n_pairs=n_pairs, witness=witness)
    return ProbeReport(passed=True, n_pairs=n_pairs, witness=None)
