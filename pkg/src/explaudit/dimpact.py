"""Closed-form probability that a random pair of queries is incoherent, for a
population model with one binary discriminative feature.

The model has two knobs: the base acceptance rate p_b for the favoured group,
and the impact ratio alpha = P(accept | unfavoured) / P(accept | favoured).
An alpha of 1 means no disparity; the 0.8 threshold is the conventional line
for a prima facie case. Two sampling scenarios are covered:

- independence: the two group-conditional decisions of a profile are drawn
  independently, so P(IP) = p_b * (1 + alpha) - 2 * alpha * p_b**2.
- dependence: profiles are totally ordered by merit and each group accepts a
  top quantile, so the unfavoured-accepted set nests inside the favoured one
  and P(IP) = p_b * (1 - alpha).
"""

from dataclasses import dataclass

from .errors import DegenerateRateError

INDEPENDENCE = "independence"
DEPENDENCE = "dependence"
SCENARIOS = (INDEPENDENCE, DEPENDENCE)

EIGHTY_PERCENT_RULE = 0.8


@dataclass(frozen=True)
class DisparityParams:
    """Point in the disparity model: impact ratio, base rate, scenario."""

    alpha: float
    p_b: float
    scenario: str

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise DegenerateRateError(
                f"impact ratio must be in (0, 1], got {self.alpha}")
        if not 0.0 <= self.p_b <= 1.0:
            raise DegenerateRateError(
                f"base rate must be in [0, 1], got {self.p_b}")
        if self.scenario not in SCENARIOS:
            raise DegenerateRateError(
                f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")


def p_ip_independence(alpha: float, p_b: float) -> float:
    return p_b * (1.0 + alpha) - 2.0 * alpha * p_b * p_b


def p_ip_dependence(alpha: float, p_b: float) -> float:
    return p_b * (1.0 - alpha)


def ip_probability(params: DisparityParams) -> float:
    """P(a uniformly drawn profile pair differing only in group is an IP)."""
    if params.scenario == INDEPENDENCE:
        return p_ip_independence(params.alpha, params.p_b)
    return p_ip_dependence(params.alpha, params.p_b)


@dataclass(frozen=True)
class ImpactPoint:
    scenario: str
    alpha: float
    p_b: float
    p_ip: float


def emit_curves(alphas, p_bs, scenarios=SCENARIOS):
    """Dense grid of IP probabilities, one point per (scenario, p_b, alpha),
    in that nesting order."""
    points = []
    for scenario in scenarios:
        for p_b in p_bs:
            for alpha in alphas:
                params = DisparityParams(alpha=alpha, p_b=p_b, scenario=scenario)
                points.append(ImpactPoint(scenario=scenario, alpha=alpha,
                                          p_b=p_b, p_ip=ip_probability(params)))
    return points
