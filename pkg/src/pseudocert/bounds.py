"""Closed-form population-risk bound calculators for pseudo-label self-training.

This module evaluates the RATT-style generalization bounds (population 0-1
risk bounded by empirical errors on clean and randomly-labeled training
portions), the optimal clean/random split of a labeled budget, the supervised
reference ceiling, the one-iteration bound map of the certified pseudo-label
loop, and the unlabeled-sample-size threshold for a target linear
convergence rate.

Everything here is pure arithmetic over immutable inputs: no RNG, no shared
state, safe to call concurrently. Counts round toward the safe side of the
inequality they feed (subset sizes round down, sample-complexity thresholds
round up), and the threshold comparison ``gamma < delta_tilde / (1 +
delta_tilde)`` is done in exact rational arithmetic so feasibility decisions
never flip on float rounding. All logarithms are natural.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

__all__ = [
    "FeasibilityError",
    "ProblemSpec",
    "EmpiricalErrors",
    "SplitSpec",
    "BoundReport",
    "ConvergenceSpec",
    "BoundIteration",
    "ratt_bound_full",
    "ratt_bound_relaxed",
    "optimal_split",
    "supervised_ceiling",
    "max_randomized_count",
    "bound_map",
    "iterate_bound_map",
    "convergence_ratios",
    "rate_threshold_value",
    "min_unlabeled_for_rate",
    "min_unlabeled_self_consistent",
    "feasibility_threshold",
    "is_feasible_gamma",
]


class FeasibilityError(ValueError):
    """A risk level or parameter combination leaves no admissible randomized subset.

    Carries ``threshold``, the largest admissible value of the offending
    quantity, when one exists.
    """

    def __init__(self, message: str, threshold: float | None = None):
        super().__init__(message)
        self.threshold = threshold


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ValueError(message)


@dataclass(frozen=True)
class ProblemSpec:
    """Fixed theory parameters shared by every bound formula.

    k            number of classes (>= 2)
    delta        confidence parameter in (0, 1); bounds hold with
                 probability at least 1 - delta per application
    epsilon      fit error the trained model is assumed to reach on the
                 correctly labeled portion, in [0, (k-1)/k)
    delta_tilde  ceiling on the noise ratio m/n the model tolerates, in (0, 1)
    """

    k: int
    delta: float
    epsilon: float
    delta_tilde: float

    def __post_init__(self):
        _require(isinstance(self.k, int) and self.k >= 2, "k must be an integer >= 2")
        _require(0.0 < self.delta < 1.0, "delta must lie in (0, 1)")
        _require(0.0 < self.delta_tilde < 1.0, "delta_tilde must lie in (0, 1)")
        # epsilon >= (k-1)/k makes the random-label inequality vacuous.
        _require(
            0.0 <= self.epsilon < (self.k - 1) / self.k,
            f"epsilon must lie in [0, (k-1)/k) = [0, {(self.k - 1) / self.k})",
        )

    @property
    def gamma_threshold(self) -> float:
        """Largest admissible population risk, delta_tilde / (1 + delta_tilde)."""
        return feasibility_threshold(self.delta_tilde)


@dataclass(frozen=True)
class EmpiricalErrors:
    """Measured 0-1 errors on the clean and randomly-labeled training portions."""

    e_clean: float
    e_random: float

    def __post_init__(self):
        _require(0.0 <= self.e_clean <= 1.0, "e_clean must lie in [0, 1]")
        _require(0.0 <= self.e_random <= 1.0, "e_random must lie in [0, 1]")


@dataclass(frozen=True)
class SplitSpec:
    """Sizes of the randomly-labeled (m) and clean (n) training portions."""

    m: int
    n: int

    def __post_init__(self):
        _require(isinstance(self.m, int) and self.m >= 1, "m must be an integer >= 1")
        _require(isinstance(self.n, int) and self.n >= 1, "n must be an integer >= 1")

    @property
    def ratio(self) -> Fraction:
        """m/n as an exact rational."""
        return Fraction(self.m, self.n)


@dataclass(frozen=True)
class BoundReport:
    """One evaluated risk bound with its additive pieces exposed.

    ``total`` is exactly the sum of the three terms. Totals above 1 are
    reported as-is with ``vacuous`` set, never clipped, so scaling behavior
    stays observable.
    """

    term_clean: float
    term_random: float
    term_concentration: float
    constant_used: float
    total: float
    formula_id: str
    vacuous: bool


@dataclass(frozen=True)
class ConvergenceSpec:
    """Target contraction rate and the band above the supervised ceiling it applies in.

    The guarantee is asked for on risk levels in [ceiling + c1, ceiling + c2];
    c1 may be arbitrarily small but must be positive.
    """

    p: float
    c1: float
    c2: float

    def __post_init__(self):
        _require(0.0 < self.p < 1.0, "p must lie in (0, 1)")
        _require(0.0 < self.c1 < self.c2 < 1.0, "need 0 < c1 < c2 < 1")


@dataclass(frozen=True)
class BoundIteration:
    """Repeated application of the bound map: values and a truncation flag."""

    values: tuple[float, ...]
    diverged: bool


def feasibility_threshold(delta_tilde: float) -> float:
    """Largest admissible population risk for a given noise-ratio ceiling."""
    _require(0.0 < delta_tilde < 1.0, "delta_tilde must lie in (0, 1)")
    return delta_tilde / (1.0 + delta_tilde)


def is_feasible_gamma(gamma: float, delta_tilde: float) -> bool:
    """Exact test of gamma < delta_tilde / (1 + delta_tilde).

    Uses rational arithmetic on the binary values of the inputs so that
    callers on either side of the threshold agree with the count formulas.
    """
    _require(0.0 < delta_tilde < 1.0, "delta_tilde must lie in (0, 1)")
    if not 0.0 <= gamma:
        return False
    dt = Fraction(delta_tilde)
    return Fraction(gamma) < dt / (1 + dt)


def _middle_term(k: int, e_random: float) -> float:
    # (k-1) * (1 - k/(k-1) * e_random); zero exactly at e_random = (k-1)/k.
    return (k - 1.0) * (1.0 - (k / (k - 1.0)) * e_random)


def _report(term_clean: float, term_random: float, term_concentration: float,
            constant: float, formula_id: str) -> BoundReport:
    total = term_clean + term_random + term_concentration
    return BoundReport(
        term_clean=term_clean,
        term_random=term_random,
        term_concentration=term_concentration,
        constant_used=constant,
        total=total,
        formula_id=formula_id,
        vacuous=total > 1.0,
    )


def ratt_bound_full(spec: ProblemSpec, split: SplitSpec, err: EmpiricalErrors) -> BoundReport:
    """Risk bound with the split-dependent worst-case constant.

    Evaluates

        e_clean + (k-1) * (1 - k/(k-1) * e_random)
                + (2k + sqrt(k) + m/(n sqrt(k))) * sqrt(log(4/delta) / (2m))

    The constant is only upper-bounded by the theory; the worst case is used
    so the returned value is always a valid bound.
    """
    k = spec.k
    c = 2.0 * k + math.sqrt(k) + split.m / (split.n * math.sqrt(k))
    conc = c * math.sqrt(math.log(4.0 / spec.delta) / (2.0 * split.m))
    return _report(err.e_clean, _middle_term(k, err.e_random), conc, c, "ratt_full")


def ratt_bound_relaxed(spec: ProblemSpec, split: SplitSpec, err: EmpiricalErrors) -> BoundReport:
    """Risk bound with the flat constant 4k, valid whenever m/n < 1.

    Evaluates

        e_clean + (k-1) * (1 - k/(k-1) * e_random) + 4k * sqrt(log(4/delta) / m)

    Raises ValueError when m/n >= 1 (exact rational comparison): the flat
    constant absorbs the split-dependent part only below that ratio.
    """
    if split.ratio >= 1:
        raise ValueError(
            f"the relaxed bound requires m/n < 1; got m/n = {split.m}/{split.n}"
        )
    k = spec.k
    c = 4.0 * k
    conc = c * math.sqrt(math.log(4.0 / spec.delta) / split.m)
    return _report(err.e_clean, _middle_term(k, err.e_random), conc, c, "ratt_relaxed")


def optimal_split(N: int, delta_tilde: float) -> SplitSpec:
    """Split N labeled examples so the randomized share saturates the noise ceiling.

    m = floor(delta_tilde / (1 + delta_tilde) * N), n = N - m, computed in
    exact rational arithmetic; the floor keeps m/n <= delta_tilde exactly.
    """
    _require(isinstance(N, int) and N >= 1, "N must be an integer >= 1")
    _require(0.0 < delta_tilde < 1.0, "delta_tilde must lie in (0, 1)")
    dt = Fraction(delta_tilde)
    m = int(dt / (1 + dt) * N)  # Fraction.__int__ truncates toward zero = floor here
    if m == 0:
        raise ValueError(
            f"too few examples for a randomized subset: N={N}, delta_tilde={delta_tilde}"
        )
    return SplitSpec(m=m, n=N - m)


def supervised_ceiling(spec: ProblemSpec, N: int) -> float:
    """Reference risk ceiling reachable with N labeled examples under the optimal split.

    (k+1) * epsilon + 4k * sqrt(log(4/delta)) / sqrt(delta_tilde/(1+delta_tilde) * N)

    The formula is continuous (no floor); N only has to be large enough that
    the optimal split yields a nonempty randomized subset.
    """
    optimal_split(N, spec.delta_tilde)  # precondition: the split must exist
    k = spec.k
    share = spec.delta_tilde / (1.0 + spec.delta_tilde)
    return (k + 1.0) * spec.epsilon + 4.0 * k * math.sqrt(math.log(4.0 / spec.delta)) / math.sqrt(share * N)


def max_randomized_count(N: int, gamma: float, delta_tilde: float) -> int:
    """Largest randomized-subset size compatible with the noise ceiling at risk gamma.

    floor( (delta_tilde*(1-gamma) - gamma) / ((1+delta_tilde)*(1-gamma)) * N ),
    computed in exact rational arithmetic. Requires gamma strictly below
    delta_tilde/(1+delta_tilde); at the threshold the admissible count is
    zero and the caller must halt, so that case raises FeasibilityError.
    """
    _require(isinstance(N, int) and N >= 1, "N must be an integer >= 1")
    _require(0.0 <= gamma, "gamma must be nonnegative")
    if not is_feasible_gamma(gamma, delta_tilde):
        raise FeasibilityError(
            f"population risk {gamma} is not below the feasibility threshold "
            f"delta_tilde/(1+delta_tilde) = {feasibility_threshold(delta_tilde)}",
            threshold=feasibility_threshold(delta_tilde),
        )
    g = Fraction(gamma)
    dt = Fraction(delta_tilde)
    value = (dt * (1 - g) - g) / ((1 + dt) * (1 - g)) * N
    return int(value)


def bound_map(spec: ProblemSpec, N: int, gamma: float) -> float:
    """Risk bound for the model trained after one certified pseudo-label pass.

    B(gamma) = (k+1)*epsilon
             + 4k*sqrt(log(4/delta)) * sqrt((1+dt)*(1-gamma)/(dt*(1-gamma)-gamma)) / sqrt(N)

    Strictly increasing in gamma on [0, dt/(1+dt)); B(0) equals the
    supervised ceiling for the same N.
    """
    _require(isinstance(N, int) and N >= 1, "N must be an integer >= 1")
    _require(0.0 <= gamma, "gamma must be nonnegative")
    dt = spec.delta_tilde
    if not is_feasible_gamma(gamma, dt):
        raise FeasibilityError(
            f"population risk {gamma} is not below the feasibility threshold "
            f"delta_tilde/(1+delta_tilde) = {feasibility_threshold(dt)}",
            threshold=feasibility_threshold(dt),
        )
    denom = dt * (1.0 - gamma) - gamma
    if denom <= 0.0:  # float rounding at the very edge of feasibility
        raise FeasibilityError(
            f"population risk {gamma} is numerically at the feasibility threshold",
            threshold=feasibility_threshold(dt),
        )
    k = spec.k
    blow_up = math.sqrt((1.0 + dt) * (1.0 - gamma) / denom)
    return (k + 1.0) * spec.epsilon + 4.0 * k * math.sqrt(math.log(4.0 / spec.delta)) * blow_up / math.sqrt(N)


def iterate_bound_map(spec: ProblemSpec, N: int, gamma0: float, steps: int) -> BoundIteration:
    """Apply the bound map repeatedly: [gamma0, B(gamma0), B(B(gamma0)), ...].

    Returns steps+1 values when every iterate stays feasible. If an iterate
    reaches the feasibility threshold (so the map cannot be applied again),
    the sequence is truncated after that value and ``diverged`` is set; an
    infeasible ``gamma0`` itself is an error.
    """
    _require(isinstance(steps, int) and steps >= 0, "steps must be an integer >= 0")
    if not is_feasible_gamma(gamma0, spec.delta_tilde):
        raise FeasibilityError(
            f"initial risk {gamma0} is not below the feasibility threshold",
            threshold=spec.gamma_threshold,
        )
    values = [float(gamma0)]
    for _ in range(steps):
        if not is_feasible_gamma(values[-1], spec.delta_tilde):
            return BoundIteration(values=tuple(values), diverged=True)
        try:
            values.append(bound_map(spec, N, values[-1]))
        except FeasibilityError:
            return BoundIteration(values=tuple(values), diverged=True)
    return BoundIteration(values=tuple(values), diverged=False)


def convergence_ratios(bounds: Sequence[float], e_d_star: float) -> list[float]:
    """Per-step contraction ratios of the gaps above the supervised ceiling.

    ratios[i] = (bounds[i+1] - e_d_star) / (bounds[i] - e_d_star). Every
    entry of ``bounds`` must exceed ``e_d_star`` for the ratios to be
    meaningful.
    """
    _require(len(bounds) >= 2, "need at least two bound values")
    for i, b in enumerate(bounds):
        if b <= e_d_star:
            raise ValueError(
                f"bounds[{i}] = {b} does not exceed the ceiling {e_d_star}; ratio undefined"
            )
    return [
        (bounds[i + 1] - e_d_star) / (bounds[i] - e_d_star)
        for i in range(len(bounds) - 1)
    ]


def rate_threshold_value(spec: ProblemSpec, conv: ConvergenceSpec, e_d_star: float) -> float:
    """Continuous unlabeled-sample-size threshold for contraction rate p on the band.

    (4k / (p*c1))^2 * [ sqrt((dt+1)/(dt - (E+c2)/(1-E-c2))) - sqrt((dt+1)/dt) ]^2 * log(4/delta)

    with E = e_d_star. Raises FeasibilityError when E + c2 >= 1 or when the
    bracket denominator dt - (E+c2)/(1-E-c2) is not positive (equivalently,
    when the top of the band is not a feasible risk level).
    """
    _require(e_d_star >= 0.0, "e_d_star must be nonnegative")
    top = e_d_star + conv.c2
    if top >= 1.0:
        raise FeasibilityError(
            f"e_d_star + c2 = {top} must be below 1 for the threshold to be defined"
        )
    dt = spec.delta_tilde
    shifted = top / (1.0 - top)
    if dt - shifted <= 0.0:
        raise FeasibilityError(
            f"bracket denominator delta_tilde - (e_d_star+c2)/(1-e_d_star-c2) = "
            f"{dt - shifted} is not positive; the top of the band is infeasible",
            threshold=feasibility_threshold(dt),
        )
    k = spec.k
    bracket = math.sqrt((dt + 1.0) / (dt - shifted)) - math.sqrt((dt + 1.0) / dt)
    return (4.0 * k / (conv.p * conv.c1)) ** 2 * bracket ** 2 * math.log(4.0 / spec.delta)


def min_unlabeled_for_rate(spec: ProblemSpec, conv: ConvergenceSpec, e_d_star: float) -> int:
    """Smallest integer unlabeled count guaranteeing contraction rate p on the band.

    Ceiling of :func:`rate_threshold_value`; rounding up keeps the guarantee.
    """
    return math.ceil(rate_threshold_value(spec, conv, e_d_star))


def min_unlabeled_self_consistent(
    spec: ProblemSpec, conv: ConvergenceSpec, cap: int = 10**15
) -> int:
    """Smallest N whose rate threshold, evaluated at that same N's ceiling, it meets.

    The explicit threshold depends on the supervised ceiling, which itself
    shrinks with N; this resolves the recursion by monotone bisection for the
    smallest integer N with N >= threshold(ceiling(N)). Below the feasibility
    floor the threshold is treated as infinite. Raises FeasibilityError when
    no N up to ``cap`` works.
    """
    _require(isinstance(cap, int) and cap >= 1, "cap must be an integer >= 1")

    def deficit(n: int) -> float:
        # positive iff n meets its own threshold
        try:
            return n - rate_threshold_value(spec, conv, supervised_ceiling(spec, n))
        except (FeasibilityError, ValueError):
            return -math.inf

    # smallest N where the optimal split exists at all
    lo = int(Fraction(1 + Fraction(spec.delta_tilde), Fraction(spec.delta_tilde))) + 1
    if deficit(lo) >= 0.0:
        return lo
    if deficit(cap) < 0.0:
        raise FeasibilityError(
            f"no unlabeled count up to {cap} satisfies its own rate threshold "
            f"for p={conv.p}, c1={conv.c1}, c2={conv.c2}"
        )
    hi = cap
    while hi - lo > 1:  # invariant: deficit(lo) < 0 <= deficit(hi)
        mid = (lo + hi) // 2
        if deficit(mid) >= 0.0:
            hi = mid
        else:
            lo = mid
    return hi
