"""Two-factor exponential decay of download density with paper age.

    rho(t) = rho0 * (A * exp(-b1 t) + (1 - A) * exp(-b2 t)),  0 <= A <= 1, b1, b2 > 0

The first term is the fast-fading novelty interest, the second the slow
archival interest. Fitting is unweighted least squares solved with a
damped Gauss-Newton (Levenberg-Marquardt) iteration. The box constraints
are enforced by optimising over unconstrained coordinates::

    rho0 = exp(w),  A = sigmoid(u),  b1 = exp(v1),  b2 = exp(v2)

so no iterate can ever leave the feasible region.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .profiles import DensitySeries

DEFAULT_GRID = {
    "weight_a": (0.3, 0.6, 0.9),
    "decay_fast": (0.2, 0.5, 1.0),
    "decay_slow": (0.005, 0.02, 0.05),
}
DEGENERATE_GAP = 1e-4
DEGENERATE_WEIGHT = 1e-6
N_PARAMS = 4

# clamps on the unconstrained coordinates; keep exp/sigmoid finite and > 0
_LOWER = np.array([-50.0, -40.0, -25.0, -25.0])
_UPPER = np.array([50.0, 40.0, 5.0, 5.0])


class DegenerateFitWarning(UserWarning):
    pass


@dataclass(frozen=True)
class DecayModelParams:
    rho0: float
    weight_a: float
    decay_fast: float
    decay_slow: float
    residual_ss: float = float("nan")
    converged: bool = False
    iterations: int = 0
    degenerate: bool = False

    def __post_init__(self):
        if not 0.0 <= self.weight_a <= 1.0:
            raise ValueError(f"weight_a={self.weight_a} outside [0, 1]")
        if not (self.decay_fast > 0 and self.decay_slow > 0):
            raise ValueError("decay rates must be positive")

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.rho0, self.weight_a, self.decay_fast, self.decay_slow])

    def canonical(self) -> "DecayModelParams":
        """Same curve, with the faster rate reported as decay_fast."""
        if self.decay_fast >= self.decay_slow:
            return self
        return DecayModelParams(
            self.rho0, 1.0 - self.weight_a, self.decay_slow, self.decay_fast,
            self.residual_ss, self.converged, self.iterations, self.degenerate,
        )

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class FitConfig:
    max_iterations: int = 200
    convergence_tol: float = 1e-10
    grid: dict = field(default_factory=lambda: dict(DEFAULT_GRID))

    def __post_init__(self):
        if self.convergence_tol <= 0:
            raise ValueError("convergence_tol must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")

    def starts(self):
        return itertools.product(self.grid["weight_a"], self.grid["decay_fast"], self.grid["decay_slow"])


def eval_model(params, age):
    """Evaluate the density at `age` (scalar or array, months >= 0)."""
    rho0, a, b1, b2 = params.vector if isinstance(params, DecayModelParams) else params
    t = np.asarray(age, dtype=float)
    if np.any(t < 0):
        raise ValueError("age must be non-negative")
    out = rho0 * (a * np.exp(-b1 * t) + (1.0 - a) * np.exp(-b2 * t))
    return float(out) if out.ndim == 0 else out


def model_jacobian(params, ages) -> np.ndarray:
    """d rho / d (rho0, A, b1, b2) at each age; shape (len(ages), 4)."""
    rho0, a, b1, b2 = params
    t = np.asarray(ages, dtype=float)
    e1 = np.exp(-b1 * t)
    e2 = np.exp(-b2 * t)
    return np.column_stack([
        a * e1 + (1.0 - a) * e2,
        rho0 * (e1 - e2),
        -rho0 * a * t * e1,
        -rho0 * (1.0 - a) * t * e2,
    ])


def objective(params, ages, rho) -> float:
    """Sum of squared residuals."""
    r = np.asarray(rho, dtype=float) - eval_model(params, ages)
    return float(r @ r)


def objective_gradient(params, ages, rho) -> np.ndarray:
    """Analytic gradient of :func:`objective` in (rho0, A, b1, b2)."""
    r = np.asarray(rho, dtype=float) - eval_model(params, ages)
    return -2.0 * model_jacobian(params, ages).T @ r


def _sigmoid(u):
    return 0.5 * (1.0 + math.tanh(0.5 * u))


def _to_natural(theta) -> np.ndarray:
    w, u, v1, v2 = theta
    return np.array([math.exp(w), _sigmoid(u), math.exp(v1), math.exp(v2)])


def _to_theta(natural) -> np.ndarray:
    rho0, a, b1, b2 = natural
    a = min(max(a, 1e-12), 1 - 1e-12)
    theta = np.array([math.log(max(rho0, 1e-300)), math.log(a / (1 - a)), math.log(b1), math.log(b2)])
    return np.clip(theta, _LOWER, _UPPER)


def _stationary(jac, grad, ss, tol) -> bool:
    """Residual (numerically) orthogonal to every Jacobian column."""
    norms = np.sqrt(np.sum(jac * jac, axis=0)) * math.sqrt(ss)
    return bool(np.all(np.abs(grad) <= tol * np.maximum(norms, 1e-300)))


def _lm(theta, ages, y, cfg: FitConfig):
    """Levenberg-Marquardt with Marquardt diagonal scaling.

    Returns (theta, ss, converged, iterations).
    """
    scale = float(y @ y) or 1.0
    nat = _to_natural(theta)
    r = y - eval_model(nat, ages)
    ss = float(r @ r)
    lam = 1e-3
    converged = False
    it = 0
    while it < cfg.max_iterations:
        it += 1
        jac = model_jacobian(nat, ages) * np.array([nat[0], nat[1] * (1 - nat[1]), nat[2], nat[3]])
        grad = jac.T @ r
        jtj = jac.T @ jac
        if ss <= 1e-28 * scale or _stationary(jac, grad, ss, 1e-12):
            converged = True
            break
        diag = np.maximum(np.diag(jtj), 1e-12 * (np.trace(jtj) or 1.0))
        improved = False
        while lam <= 1e16:
            try:
                step = np.linalg.solve(jtj + lam * np.diag(diag), grad)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            cand = np.clip(theta + step, _LOWER, _UPPER)
            cand_nat = _to_natural(cand)
            cand_r = y - eval_model(cand_nat, ages)
            cand_ss = float(cand_r @ cand_r)
            if np.isfinite(cand_ss) and cand_ss < ss:
                improved = True
                break
            lam *= 10.0
        if not improved:
            # no descent direction left at any damping: a stationary point
            # in floating point, unless the gradient is still substantial
            converged = ss <= 1e-20 * scale or _stationary(jac, grad, ss, 1e-6)
            break
        rel = (ss - cand_ss) / max(ss, 1e-300)
        theta, nat, r, ss = cand, cand_nat, cand_r, cand_ss
        lam = max(lam / 10.0, 1e-12)
        if rel < cfg.convergence_tol:
            converged = True
            break
    return theta, ss, converged, it


def _initial_rho0(ages, y, a, b1, b2):
    shape = eval_model((1.0, a, b1, b2), ages)
    denom = float(shape @ shape)
    val = float(shape @ y) / denom if denom > 0 else 0.0
    return val if val > 0 else max(float(np.max(y)), 1e-12)


def fit_arrays(ages, rho, config: FitConfig | None = None) -> DecayModelParams:
    cfg = config or FitConfig()
    ages = np.asarray(ages, dtype=float)
    y = np.asarray(rho, dtype=float)
    if ages.shape != y.shape:
        raise ValueError("ages and rho differ in length")
    if len(ages) <= N_PARAMS:
        raise ValueError(f"need at least {N_PARAMS + 1} ages to fit {N_PARAMS} parameters, got {len(ages)}")
    if np.any(ages < 0) or not np.all(np.isfinite(y)):
        raise ValueError("ages must be non-negative and densities finite")

    candidates = []
    for a, b1, b2 in cfg.starts():
        theta0 = _to_theta((_initial_rho0(ages, y, a, b1, b2), a, b1, b2))
        theta, ss, conv, its = _lm(theta0, ages, y, cfg)
        nat = _to_natural(theta)
        p = DecayModelParams(float(nat[0]), float(nat[1]), float(nat[2]), float(nat[3]), ss, conv, its).canonical()
        candidates.append(p)
    best = min(candidates, key=lambda p: (p.residual_ss, p.rho0, p.weight_a, p.decay_fast, p.decay_slow))
    # two factors collapse into one when the rates meet or one weight vanishes
    degenerate = (
        abs(best.decay_fast - best.decay_slow) < DEGENERATE_GAP
        or min(best.weight_a, 1.0 - best.weight_a) < DEGENERATE_WEIGHT
    )
    if degenerate:
        warnings.warn(
            f"fit collapsed to a single factor (A={best.weight_a:.3g}, b1={best.decay_fast:.3g}, "
            f"b2={best.decay_slow:.3g}); the two factors are not separately identifiable",
            DegenerateFitWarning,
            stacklevel=2,
        )
    return DecayModelParams(
        best.rho0, best.weight_a, best.decay_fast, best.decay_slow,
        best.residual_ss, best.converged, best.iterations, degenerate,
    )


def fit(density: DensitySeries, config: FitConfig | None = None) -> DecayModelParams:
    """Least-squares fit of the two-factor model to an observed density.

    The best of a small multistart grid is returned. Failure to converge is
    reported through ``converged=False``, never by raising.
    """
    return fit_arrays(density.ages, density.rho, config)


def integrated_density(params, x):
    """Integral of rho(t)/rho0 over [0, x]; x may be ``math.inf``."""
    _, a, b1, b2 = params.vector if isinstance(params, DecayModelParams) else params
    if math.isinf(x):
        return a / b1 + (1.0 - a) / b2
    return -a * math.expm1(-b1 * x) / b1 - (1.0 - a) * math.expm1(-b2 * x) / b2


def half_share_point(params, horizon=None, resolution: float = 0.01) -> float:
    """Continuous age by which half of the density mass over [0, horizon] is reached.

    Bisection stops once the bracket is narrower than `resolution`; the upper
    end (which satisfies the half-mass condition) is returned.
    """
    h = math.inf if horizon is None else float(horizon)
    if h <= 0:
        raise ValueError("horizon must be positive")
    target = 0.5 * integrated_density(params, h)
    lo = 0.0
    hi = h if math.isfinite(h) else 1.0
    while math.isinf(h) and integrated_density(params, hi) < target:
        hi *= 2.0
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if integrated_density(params, mid) >= target:
            hi = mid
        else:
            lo = mid
    return hi


def half_share_age(params, horizon=None) -> int:
    """Whole-month age below which half of the downloads fall.

    `horizon` bounds the oldest paper age considered (None = unbounded).
    """
    return int(math.floor(half_share_point(params, horizon) + 0.5))


@dataclass
class FitReport:
    params: DecayModelParams
    ages: np.ndarray
    observed: np.ndarray
    fitted: np.ndarray
    curve_ages: np.ndarray
    curve_values: np.ndarray
    half_share: dict = field(default_factory=dict)

    @property
    def residuals(self) -> np.ndarray:
        return self.observed - self.fitted

    def rows(self):
        for age, obs, fit_, res in zip(self.ages, self.observed, self.fitted, self.residuals):
            yield int(age), float(obs), float(fit_), float(res)

    def parameter_table(self) -> list[tuple[str, object]]:
        return list(self.params.to_dict().items())


REPORT_HEADER = ("age", "observed_rho", "fitted_rho", "residual")


def model_report(params: DecayModelParams, density: DensitySeries, horizons=None, samples_per_month: int = 4) -> FitReport:
    """Residuals, a sampled fitted curve and half-share ages per horizon.

    `horizons` defaults to the observed age span plus the unbounded case.
    """
    ages = np.asarray(density.ages)
    observed = np.asarray(density.rho, dtype=float)
    fitted = eval_model(params, ages)
    span = int(ages.max()) + 1
    curve_ages = np.linspace(0, ages.max(), int(ages.max()) * samples_per_month + 1)
    if horizons is None:
        horizons = (span, None)
    half = {("unbounded" if h is None else int(h)): half_share_age(params, h) for h in horizons}
    return FitReport(params, ages, observed, fitted, curve_ages, eval_model(params, curve_ages), half)
