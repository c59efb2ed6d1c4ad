"""Algebraic persistence/permanence certificates and explicit bounds.

A certificate packages the matrices built from a model's coefficient bounds,
positive witness vectors for the strict inequalities that the theory
requires, and the explicit asymptotic bounds those witnesses imply.  Every
witness returned here is re-verified by direct substitution; inequalities
that hold with margin below STRICT_MARGIN are reported inconclusive, never
asserted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolationError, DegenerateModelError, NumericDomainError
from .models import CooperativeLVSpec, LogisticNetSpec, NonautLVSpec, StageStructuredSpec

STRICT_MARGIN = 1e-10
_POSITIVE_ROOT_FLOOR = 1e-8
_WITNESS_UPPER = 1e6


# ---------------------------------------------------------------------------
# Result containers
# ---------------------------------------------------------------------------


@dataclass
class MatrixBundle:
    """Matrices a certificate is decided on.

    ``growth`` is the Metzler-patterned gain matrix (off-diagonals >= 0),
    ``decay`` the Z-patterned loss matrix (off-diagonals <= 0); time-varying
    models carry lower/upper growth envelopes instead of a single matrix.
    """

    kind: str
    n: int
    growth: np.ndarray | None = None
    decay: np.ndarray | None = None
    growth_lower: np.ndarray | None = None
    growth_upper: np.ndarray | None = None

    def to_json(self):
        out = {"kind": self.kind, "n": self.n}
        for name in ("growth", "decay", "growth_lower", "growth_upper"):
            m = getattr(self, name)
            if m is not None:
                out[name] = [[float(x) for x in row] for row in m]
        return out


@dataclass
class Condition:
    name: str
    holds: bool
    margin: float
    inconclusive: bool = False

    def to_json(self):
        return {
            "name": self.name,
            "holds": self.holds,
            "margin": self.margin,
            "inconclusive": self.inconclusive,
        }


@dataclass
class BoundsPair:
    """Uniform asymptotic bounds in the scaled variables x_i / v_i."""

    lower: float
    upper: float
    scaling: np.ndarray
    vacuous: bool = False

    def to_json(self):
        return {
            "lower": self.lower,
            "upper": self.upper,
            "scaling": [float(x) for x in self.scaling],
            "vacuous": self.vacuous,
        }


@dataclass
class Certificate:
    theorem: str
    bundle: MatrixBundle
    conditions: list
    persistent: bool
    permanent: bool
    attractor: bool | None = None
    spectral_bound: float | None = None
    witness_growth: np.ndarray | None = None
    witness_decay: np.ndarray | None = None
    equilibrium: np.ndarray | None = None
    growth_at_equilibrium: np.ndarray | None = None
    equilibria: list = field(default_factory=list)
    bounds: BoundsPair | None = None
    delta: float | None = None
    first_level_lower: np.ndarray | None = None
    first_level_upper: np.ndarray | None = None
    notes: list = field(default_factory=list)

    def condition(self, name):
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_json(self):
        def vec(v):
            return None if v is None else [float(x) for x in v]

        return {
            "theorem": self.theorem,
            "matrices": self.bundle.to_json(),
            "witnesses": {
                "growth": vec(self.witness_growth),
                "decay": vec(self.witness_decay),
            },
            "spectral_bound": self.spectral_bound,
            "conditions": [c.to_json() for c in self.conditions],
            "bounds": {
                "m0": None if self.bounds is None else self.bounds.lower,
                "M0": None if self.bounds is None else self.bounds.upper,
                "scaling": None if self.bounds is None else [float(x) for x in self.bounds.scaling],
                "vacuous": None if self.bounds is None else self.bounds.vacuous,
                "equilibrium": vec(self.equilibrium),
                "growth_at_equilibrium": vec(self.growth_at_equilibrium),
                "delta": self.delta,
                "first_level_lower": vec(self.first_level_lower),
                "first_level_upper": vec(self.first_level_upper),
            },
            "flags": {
                "persistent": self.persistent,
                "permanent": self.permanent,
                "attractor": self.attractor,
            },
            "notes": list(self.notes),
        }


# ---------------------------------------------------------------------------
# Matrix structure helpers
# ---------------------------------------------------------------------------


def _offdiag_min(m):
    a = np.asarray(m, dtype=float)
    mask = ~np.eye(a.shape[0], dtype=bool)
    return float(a[mask].min()) if mask.any() else 0.0


def _offdiag_max(m):
    a = np.asarray(m, dtype=float)
    mask = ~np.eye(a.shape[0], dtype=bool)
    return float(a[mask].max()) if mask.any() else 0.0


def _require_metzler(m):
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ContractViolationError("expected a square matrix")
    if m.shape[0] > 1 and _offdiag_min(m) < -1e-12:
        raise ContractViolationError("matrix has a negative off-diagonal entry (not Metzler)")
    return m


def _require_z_pattern(m):
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ContractViolationError("expected a square matrix")
    if m.shape[0] > 1 and _offdiag_max(m) > 1e-12:
        raise ContractViolationError("matrix has a positive off-diagonal entry (not Z-patterned)")
    return m


def _is_irreducible(m):
    """Strong connectivity of the nonzero off-diagonal pattern."""
    n = m.shape[0]
    if n == 1:
        return True
    adj = m != 0.0

    def reaches_all(transposed):
        seen = np.zeros(n, dtype=bool)
        stack = [0]
        seen[0] = True
        while stack:
            i = stack.pop()
            row = adj[:, i] if transposed else adj[i]
            for j in np.nonzero(row)[0]:
                if not seen[j]:
                    seen[j] = True
                    stack.append(j)
        return bool(seen.all())

    return reaches_all(False) and reaches_all(True)


# ---------------------------------------------------------------------------
# Positive witnesses: dominant-eigenvector route and feasibility route
# ---------------------------------------------------------------------------


def _power_iteration(a, tol=1e-12, max_iter=100_000):
    """Dominant eigenpair of a nonnegative matrix by power iteration.

    Convergence is declared on the residual |a v - lam v|_inf; raises when
    the residual does not reach tolerance (defective dominant blocks)."""
    n = a.shape[0]
    v = np.full(n, 1.0 / n)
    lam = 0.0
    for _ in range(max_iter):
        w = a @ v
        nw = float(np.max(np.abs(w)))
        if nw == 0.0:
            return 0.0, v
        w /= nw
        lam = float(v @ (a @ v) / (v @ v))
        if float(np.max(np.abs(a @ v - lam * v))) <= tol * max(1.0, abs(lam)):
            return lam, v
        v = w
    raise NumericDomainError("power iteration did not converge")


def spectral_bound(m, tol=1e-12):
    """Largest real part of the spectrum of a Metzler matrix, computed as the
    dominant eigenvalue of the nonnegative shift m + c*I minus c."""
    m = _require_metzler(m)
    c = 1.0 + float(np.max(np.abs(np.diagonal(m))))
    lam, _ = _power_iteration(m + c * np.eye(m.shape[0]), tol=tol)
    return lam - c


def _phase_one_feasible(a, b, upper, tol=1e-9, max_iter=20_000):
    """Feasible point of {x : a x >= b, 0 <= x <= upper} by a dense
    phase-one simplex (Bland's rule), or None when infeasible."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    upper = np.asarray(upper, dtype=float)
    m0, nx = a.shape
    if (b <= 0).all():
        return np.zeros(nx)

    n_s, n_r = m0, nx
    art_rows = [i for i in range(m0) if b[i] > 0]
    n_a = len(art_rows)
    ncol = nx + n_s + n_r + n_a
    nrow = m0 + nx
    t = np.zeros((nrow, ncol + 1))
    basis = np.empty(nrow, dtype=int)

    art_ptr = 0
    for i in range(m0):
        if b[i] > 0:
            t[i, :nx] = a[i]
            t[i, nx + i] = -1.0  # surplus
            col = nx + n_s + n_r + art_ptr
            t[i, col] = 1.0
            t[i, -1] = b[i]
            basis[i] = col
            art_ptr += 1
        else:
            t[i, :nx] = -a[i]
            t[i, nx + i] = 1.0  # slack after negating the row
            t[i, -1] = -b[i]
            basis[i] = nx + i
    for j in range(nx):
        r = m0 + j
        t[r, j] = 1.0
        t[r, nx + n_s + j] = 1.0
        t[r, -1] = upper[j]
        basis[r] = nx + n_s + j

    # price out the artificial basis: reduced costs of min(sum of artificials)
    cost = np.zeros(ncol + 1)
    for i in range(m0):
        if basis[i] >= nx + n_s + n_r:
            cost -= t[i]

    in_basis = np.zeros(ncol, dtype=bool)
    in_basis[basis] = True
    for _ in range(max_iter):
        enter = -1
        for j in range(ncol):
            if not in_basis[j] and cost[j] < -tol:
                enter = j
                break
        if enter < 0:
            break
        col = t[:, enter]
        best = -1
        best_ratio = math.inf
        for i in range(nrow):
            if col[i] > tol:
                ratio = t[i, -1] / col[i]
                if ratio < best_ratio - tol or (
                    abs(ratio - best_ratio) <= tol and (best < 0 or basis[i] < basis[best])
                ):
                    best = i
                    best_ratio = ratio
        if best < 0:
            return None  # defensive: bounded variables rule out an unbounded phase one
        pivot = t[best, enter]
        t[best] /= pivot
        for i in range(nrow):
            if i != best and t[i, enter] != 0.0:
                t[i] -= t[i, enter] * t[best]
        cost -= cost[enter] * t[best]
        in_basis[basis[best]] = False
        in_basis[enter] = True
        basis[best] = enter

    if -cost[-1] > 1e-7:
        return None  # artificials cannot be driven to zero: infeasible
    x = np.zeros(nx)
    for i in range(nrow):
        if basis[i] < nx:
            x[basis[i]] = t[i, -1]
    x = np.clip(x, 0.0, upper)
    if (a @ x < b - 1e-7).any():
        return None
    return x


def _positive_vector_and_bound(m, tol=1e-12):
    """Witness v > 0 with m v > 0 (or None) plus the spectral bound when the
    eigenvalue route ran.  Perron iteration decides irreducible matrices; the
    bounded feasibility problem {m v >= 1, 1 <= v <= 1e6} decides the rest."""
    m = _require_metzler(m)
    n = m.shape[0]
    s = None
    if _is_irreducible(m):
        c = 1.0 + float(np.max(np.abs(np.diagonal(m))))
        try:
            lam, v = _power_iteration(m + c * np.eye(n), tol=tol)
            s = lam - c
            if s > STRICT_MARGIN:
                v = v / v.min()
                if float((m @ v).min()) > 0.0:
                    return v, s
                # eigenvector failed re-verification; fall through to feasibility
            else:
                return None, s
        except NumericDomainError:
            pass  # non-convergent dominant block: decide by feasibility
    w = _phase_one_feasible(
        m, np.ones(n) - m @ np.ones(n), np.full(n, _WITNESS_UPPER - 1.0)
    )
    if w is None:
        return None, s
    v = 1.0 + w
    v = v / v.min()
    if float((m @ v).min()) > 0.0:
        return v, s
    return None, s


def find_positive_vector(m, tol=1e-12):
    """Positive vector v with m v > 0 for a Metzler matrix m, or None.

    The returned witness is normalized to min component 1 and re-verified by
    substitution."""
    v, _ = _positive_vector_and_bound(m, tol=tol)
    return v


def m_matrix_check(n_matrix):
    """Decide whether a Z-patterned matrix admits q > 0 with N q > 0.

    Solves N q = 1 directly; success with strictly positive q is exactly the
    non-singular M-matrix property.  Singular systems return (False, None).
    """
    n_matrix = _require_z_pattern(n_matrix)
    n = n_matrix.shape[0]
    try:
        q = np.linalg.solve(n_matrix, np.ones(n))
    except np.linalg.LinAlgError:
        return False, None
    if not np.all(np.isfinite(q)):
        return False, None
    if float(np.max(np.abs(n_matrix @ q - 1.0))) > 1e-8 * max(1.0, float(np.max(np.abs(q)))):
        return False, None  # solve degraded by near-singularity
    if q.min() > 0.0:
        return True, q
    return False, None


# ---------------------------------------------------------------------------
# Matrix builders
# ---------------------------------------------------------------------------


def build_lv_matrices(spec: CooperativeLVSpec) -> MatrixBundle:
    """growth = diag(beta) + [d_ij]; decay = diag(mu) - [a_ij].

    The decay matrix subtracts the interaction coefficients a_ij because the
    per-capita loss functional evaluated at a constant vector v is exactly
    (diag(mu) - [a_ij]) v; the dispersal coefficients d_ij belong to the gain
    side only.
    """
    m = np.diag(spec.beta) + spec.d
    n = np.diag(spec.mu) - spec.a
    return MatrixBundle(kind="cooperative_lv", n=spec.n, growth=m, decay=n)


def build_nonaut_matrices(spec: NonautLVSpec) -> MatrixBundle:
    """Envelope matrices from closed-form coefficient bounds: lower/upper
    growth from inf/sup of beta and d, decay from inf mu minus sup a."""
    n = spec.n
    beta_lo = np.array([c.bounds()[0] for c in spec.beta])
    beta_hi = np.array([c.bounds()[1] for c in spec.beta])
    mu_lo = np.array([c.bounds()[0] for c in spec.mu])
    d_lo = np.array([[c.bounds()[0] for c in row] for row in spec.d])
    d_hi = np.array([[c.bounds()[1] for c in row] for row in spec.d])
    a_hi = np.array([[c.bounds()[1] for c in row] for row in spec.a])
    return MatrixBundle(
        kind="nonautonomous_lv",
        n=n,
        growth_lower=np.diag(beta_lo) + d_lo,
        growth_upper=np.diag(beta_hi) + d_hi,
        decay=np.diag(mu_lo) - a_hi,
    )


def build_logistic_matrix(spec: LogisticNetSpec) -> MatrixBundle:
    """Metzler test matrix with diagonal inf(total growth) - sup(mu) and
    off-diagonal inf(dispersal).

    The diagonal uses the sum of per-term infima, a safe inner bound for the
    infimum of the total growth rate."""
    n = spec.n
    h = np.zeros((n, n))
    for i in range(n):
        h[i, i] = sum(c.bounds()[0] for c in spec.alpha[i]) - spec.mu[i].bounds()[1]
        for j in range(n):
            if j != i:
                h[i, j] = spec.d[i][j].bounds()[0]
    return MatrixBundle(kind="logistic_network", n=n, growth=h)


# ---------------------------------------------------------------------------
# Equilibria
# ---------------------------------------------------------------------------


def lv_equilibrium(spec: CooperativeLVSpec, guess):
    """Positive root of the delay-free reduction by Newton iteration.

    Constant states make every normalized kernel integrate to 1, so the
    equilibria coincide with those of the instantaneous system
    x_i (beta_i - mu_i x_i + sum_j a_ij x_j) + sum_j d_ij x_j = 0.
    Returns None on divergence, a singular Jacobian, or a non-positive root.
    """
    x = np.asarray(guess, dtype=float).copy()
    if (x <= 0).any():
        raise ValueError("guess must be positive")
    n = spec.n
    nudges = 0
    for _ in range(100):
        inter = spec.beta - spec.mu * x + spec.a @ x
        r = x * inter + spec.d @ x
        if not np.all(np.isfinite(r)):
            return None
        if float(np.max(np.abs(r))) <= 1e-12:
            return x if x.min() > _POSITIVE_ROOT_FLOOR else None
        jac = np.diag(inter - spec.mu * x) + x[:, None] * spec.a + spec.d
        try:
            step = np.linalg.solve(jac, r)
        except np.linalg.LinAlgError:
            # symmetric guesses can sit exactly on a singular manifold;
            # nudge off it deterministically and retry
            nudges += 1
            if nudges > 3:
                return None
            x = x * (1.0 + 1e-8 * np.arange(1, n + 1))
            continue
        x = x - step
        if not np.all(np.isfinite(x)):
            return None
    return None


def _distinct_positive_roots(spec, guesses):
    roots = []
    for g in guesses:
        x = lv_equilibrium(spec, g)
        if x is None:
            continue
        if not any(
            np.max(np.abs(x - r)) <= 1e-8 * max(1.0, float(np.max(np.abs(r)))) for r in roots
        ):
            roots.append(x)
    return roots


# ---------------------------------------------------------------------------
# Certificates per model family
# ---------------------------------------------------------------------------


def _condition(name, margin):
    if margin > STRICT_MARGIN:
        return Condition(name, True, float(margin))
    if margin > 0.0:
        return Condition(name, False, float(margin), inconclusive=True)
    return Condition(name, False, float(margin))


def lv_certificate(spec: CooperativeLVSpec, guess=None) -> Certificate:
    """Persistence, permanence, and attractivity certificate for the
    autonomous patch Lotka-Volterra model."""
    bundle = build_lv_matrices(spec)
    v, s = _positive_vector_and_bound(bundle.growth)
    if s is None:
        try:
            s = spectral_bound(bundle.growth)
        except (NumericDomainError, ContractViolationError):
            s = None
    ok_decay, q = m_matrix_check(bundle.decay)

    conditions = [
        _condition("growth_positive_witness", float((bundle.growth @ v).min()) if v is not None else (s if s is not None else -math.inf)),
        _condition("decay_m_matrix", float(q.min()) if q is not None else -math.inf),
    ]
    persistent = v is not None and conditions[0].holds
    permanent = persistent and ok_decay and conditions[1].holds

    guesses = [np.full(spec.n, g) for g in (0.1, 1.0, 10.0)]
    if guess is not None:
        guesses.insert(0, np.asarray(guess, dtype=float))
    roots = _distinct_positive_roots(spec, guesses)

    notes = []
    attractor = False
    equilibrium = None
    growth_at_eq = None
    equilibria = []
    for x in roots:
        mx = bundle.growth @ x
        equilibria.append({"x": x, "growth_at_equilibrium": mx, "condition_margin": float(mx.min())})
    if roots:
        equilibrium = roots[0]
        growth_at_eq = bundle.growth @ equilibrium
        cond_attr = _condition("attractor_condition", float(growth_at_eq.min()))
        conditions.append(cond_attr)
        if len(roots) > 1:
            notes.append("multiple positive equilibria found; attractivity downgraded")
        else:
            attractor = bool(permanent and cond_attr.holds)
    else:
        conditions.append(Condition("attractor_condition", False, -math.inf))
        notes.append("no positive equilibrium found from the default starts")

    return Certificate(
        theorem="cooperative_lv",
        bundle=bundle,
        conditions=conditions,
        persistent=persistent,
        permanent=permanent,
        attractor=attractor,
        spectral_bound=s,
        witness_growth=v,
        witness_decay=q,
        equilibrium=equilibrium,
        growth_at_equilibrium=growth_at_eq,
        equilibria=equilibria,
        notes=notes,
    )


def nonaut_certificate(spec: NonautLVSpec) -> Certificate:
    """Certificate for the time-varying patch model via envelope matrices:
    persistence needs a lower-growth witness, permanence additionally an
    upper-growth witness and the decay M-matrix property."""
    bundle = build_nonaut_matrices(spec)
    v_lo, s = _positive_vector_and_bound(bundle.growth_lower)
    v_hi, _ = _positive_vector_and_bound(bundle.growth_upper)
    ok_decay, q = m_matrix_check(bundle.decay)

    conditions = [
        _condition(
            "growth_lower_positive_witness",
            float((bundle.growth_lower @ v_lo).min()) if v_lo is not None else -math.inf,
        ),
        _condition(
            "growth_upper_positive_witness",
            float((bundle.growth_upper @ v_hi).min()) if v_hi is not None else -math.inf,
        ),
        _condition("decay_lower_m_matrix", float(q.min()) if q is not None else -math.inf),
    ]
    persistent = v_lo is not None and conditions[0].holds
    permanent = bool(persistent and v_hi is not None and conditions[1].holds and ok_decay)
    return Certificate(
        theorem="nonautonomous_lv",
        bundle=bundle,
        conditions=conditions,
        persistent=persistent,
        permanent=permanent,
        attractor=None,
        spectral_bound=s,
        witness_growth=v_lo,
        witness_decay=q,
    )


# ---------------------------------------------------------------------------
# Logistic network bounds
# ---------------------------------------------------------------------------


def _interval_div(num_lo, num_hi, den_lo, den_hi):
    """Outer interval of num/den for 0 < den_lo <= den_hi."""
    lo = num_lo / den_hi if num_lo >= 0 else num_lo / den_lo
    hi = num_hi / den_lo if num_hi >= 0 else num_hi / den_hi
    return lo, hi


def logistic_bounds(spec: LogisticNetSpec, v, refine_samples=0) -> BoundsPair:
    """Explicit asymptotic bounds for the scaled states x_i / v_i.

    The upper bound divides the largest possible net gain by the smallest
    quadratic loss; the lower bound feeds that upper bound back through the
    saturation terms.  Sinusoidal coefficients are bracketed by interval
    arithmetic over their closed-form bounds (outer for the upper bound,
    inner for the lower), exact arithmetic for constants.  ``refine_samples``
    adds a dense time-sampling pass that can only tighten the reported pair.
    """
    v = np.asarray(v, dtype=float)
    n = spec.n
    if v.shape != (n,) or (v <= 0).any():
        raise ValueError("scaling vector must be positive of length n")

    upper_candidates = []
    for i in range(n):
        num_hi = v[i] * (
            sum(c.bounds()[1] for c in spec.alpha[i]) - spec.mu[i].bounds()[0]
        ) + sum(spec.d[i][j].bounds()[1] * v[j] for j in range(n))
        num_lo = v[i] * (
            sum(c.bounds()[0] for c in spec.alpha[i]) - spec.mu[i].bounds()[1]
        ) + sum(spec.d[i][j].bounds()[0] * v[j] for j in range(n))
        den_lo = v[i] ** 2 * spec.kappa[i].bounds()[0]
        den_hi = v[i] ** 2 * spec.kappa[i].bounds()[1]
        upper_candidates.append(_interval_div(num_lo, num_hi, den_lo, den_hi)[1])
    m_upper = max(upper_candidates)

    lower_candidates = []
    for i in range(n):
        sat_lo = sum(
            a.bounds()[0] / (1.0 + b.bounds()[1] * v[i] * max(m_upper, 0.0))
            for a, b in zip(spec.alpha[i], spec.beta[i])
        )
        num_lo = v[i] * (sat_lo - spec.mu[i].bounds()[1]) + sum(
            spec.d[i][j].bounds()[0] * v[j] for j in range(n)
        )
        den_lo = v[i] ** 2 * spec.kappa[i].bounds()[0]
        den_hi = v[i] ** 2 * spec.kappa[i].bounds()[1]
        lower_candidates.append(_interval_div(num_lo, num_lo, den_lo, den_hi)[0])
    m_lower = min(lower_candidates)

    if refine_samples > 0:
        m_upper = min(m_upper, _sampled_upper(spec, v, refine_samples))
        # re-derive the lower bound from the tightened upper bound
        m_lower = max(m_lower, _sampled_lower(spec, v, m_upper, refine_samples))

    return BoundsPair(lower=m_lower, upper=m_upper, scaling=v, vacuous=m_lower <= 0.0)


def _sample_span(spec):
    periods = [2 * math.pi / c.omega for row in [spec.mu, spec.kappa] for c in row if c.omega and c.c1]
    for i in range(spec.n):
        periods += [2 * math.pi / c.omega for c in spec.alpha[i] + spec.beta[i] if c.omega and c.c1]
        periods += [2 * math.pi / c.omega for c in spec.d[i] if c.omega and c.c1]
    return max(periods) if periods else 1.0


def _sampled_upper(spec, v, samples):
    ts = np.linspace(0.0, _sample_span(spec), samples)
    worst = -math.inf
    for i in range(spec.n):
        vals = [
            (
                v[i] * (sum(c.value(t) for c in spec.alpha[i]) - spec.mu[i].value(t))
                + sum(spec.d[i][j].value(t) * v[j] for j in range(spec.n))
            )
            / (v[i] ** 2 * spec.kappa[i].value(t))
            for t in ts
        ]
        worst = max(worst, max(vals))
    return worst


def _sampled_lower(spec, v, m_upper, samples):
    ts = np.linspace(0.0, _sample_span(spec), samples)
    best = math.inf
    for i in range(spec.n):
        vals = [
            (
                v[i]
                * (
                    sum(
                        a.value(t) / (1.0 + b.value(t) * v[i] * max(m_upper, 0.0))
                        for a, b in zip(spec.alpha[i], spec.beta[i])
                    )
                    - spec.mu[i].value(t)
                )
                + sum(spec.d[i][j].value(t) * v[j] for j in range(spec.n))
            )
            / (v[i] ** 2 * spec.kappa[i].value(t))
            for t in ts
        ]
        best = min(best, min(vals))
    return best


def logistic_certificate(spec: LogisticNetSpec, refine_samples=0) -> Certificate:
    """Boundedness/persistence witness plus explicit permanence bounds for
    the logistic dispersal network."""
    bundle = build_logistic_matrix(spec)
    v, s = _positive_vector_and_bound(bundle.growth)
    conditions = [
        _condition(
            "growth_positive_witness",
            float((bundle.growth @ v).min()) if v is not None else (s if s is not None else -math.inf),
        ),
    ]
    escaping = all(d.escaping for row in spec.tau for d in row) and all(
        d.escaping for row in spec.sigma for d in row
    )
    conditions.append(Condition("delays_escaping", escaping, math.inf if escaping else -math.inf))

    persistent = v is not None and conditions[0].holds
    permanent = bool(persistent and escaping)
    bounds = None
    notes = []
    if persistent:
        bounds = logistic_bounds(spec, v, refine_samples=refine_samples)
        conditions.append(_condition("lower_bound_positive", bounds.lower))
        if bounds.vacuous:
            notes.append("explicit lower bound is not positive; permanence bound vacuous")
    else:
        conditions.append(Condition("lower_bound_positive", False, -math.inf))

    return Certificate(
        theorem="logistic_network",
        bundle=bundle,
        conditions=conditions,
        persistent=persistent,
        permanent=permanent,
        attractor=None,
        spectral_bound=s,
        witness_growth=v,
        bounds=bounds,
        notes=notes,
    )


# ---------------------------------------------------------------------------
# Stage-structured competition
# ---------------------------------------------------------------------------


def stage_equilibrium(spec: StageStructuredSpec):
    """Unique candidate equilibrium of the competing mature stages:
    solves beta_1 u1 + c_1 u2 = alpha_1 kappa_1, c_2 u1 + beta_2 u2 =
    alpha_2 kappa_2 in closed form."""
    kappa = spec.maturation_mass()
    det = spec.beta[0] * spec.beta[1] - spec.c[0] * spec.c[1]
    if abs(det) < 1e-14:
        raise DegenerateModelError("beta_1*beta_2 equals c_1*c_2; equilibrium undefined")
    g1 = spec.alpha[0] * kappa[0]
    g2 = spec.alpha[1] * kappa[1]
    u1 = (spec.beta[1] * g1 - spec.c[0] * g2) / det
    u2 = (spec.beta[0] * g2 - spec.c[1] * g1) / det
    return np.array([u1, u2]), kappa


def stage_delta_margins(spec: StageStructuredSpec, delta):
    """Margins of the two strict slack conditions a positive delta must
    satisfy before the bounding recursion applies."""
    kappa = spec.maturation_mass()
    g1 = spec.alpha[0] * kappa[0]
    g2 = spec.alpha[1] * kappa[1]
    m1 = spec.beta[0] * g2 - spec.c[1] * (delta * spec.beta[0] + g1)
    m2 = spec.beta[1] * g1 - spec.c[0] * (delta * spec.beta[1] + g2)
    return float(m1), float(m2)


def stage_certificate(spec: StageStructuredSpec) -> Certificate:
    """Global-attractivity certificate for the stage-structured competition
    model: both cross-competition bounds strict, closed-form positive
    equilibrium, and the largest workable slack delta (half the tightest
    slack ratio), re-verified by substitution."""
    u_star, kappa = stage_equilibrium(spec)
    g1 = spec.alpha[0] * kappa[0]
    g2 = spec.alpha[1] * kappa[1]
    margin_2 = spec.beta[0] * g2 - spec.c[1] * g1  # positivity of u*_2
    margin_1 = spec.beta[1] * g1 - spec.c[0] * g2  # positivity of u*_1
    conditions = [
        _condition("equilibrium_positive_1", margin_1),
        _condition("equilibrium_positive_2", margin_2),
    ]
    holds = conditions[0].holds and conditions[1].holds

    delta = None
    lower = upper = None
    notes = []
    if holds:
        candidates = []
        if spec.c[1] > 0:
            candidates.append(margin_2 / (spec.c[1] * spec.beta[0]))
        if spec.c[0] > 0:
            candidates.append(margin_1 / (spec.c[0] * spec.beta[1]))
        delta = 0.5 * min(candidates) if candidates else 1.0
        d1, d2 = stage_delta_margins(spec, delta)
        conditions.append(_condition("delta_margin_1", d1))
        conditions.append(_condition("delta_margin_2", d2))
        upper = np.array([g1 / spec.beta[0], g2 / spec.beta[1]])
        lower = np.array(
            [
                (g1 - spec.c[0] * (upper[1] + delta)) / spec.beta[0],
                (g2 - spec.c[1] * (upper[0] + delta)) / spec.beta[1],
            ]
        )
    else:
        notes.append("cross-competition bounds fail; no certificate")

    bundle = MatrixBundle(kind="stage_structured", n=2)
    return Certificate(
        theorem="stage_structured",
        bundle=bundle,
        conditions=conditions,
        persistent=holds,
        permanent=holds,
        attractor=holds,
        equilibrium=u_star if holds else None,
        delta=delta,
        first_level_lower=lower,
        first_level_upper=upper,
        notes=notes,
    )


def certificate_for(model) -> Certificate:
    """Build the certificate matching the model family."""
    if isinstance(model, CooperativeLVSpec):
        return lv_certificate(model)
    if isinstance(model, NonautLVSpec):
        return nonaut_certificate(model)
    if isinstance(model, LogisticNetSpec):
        return logistic_certificate(model)
    if isinstance(model, StageStructuredSpec):
        return stage_certificate(model)
    raise TypeError(f"unsupported model type {type(model).__name__}")
