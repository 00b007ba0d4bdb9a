"""Beliefs over local value parameters as mixtures of uniform distributions.

The class is closed under conditioning on threshold responses ("is the value
at least l?"): the component straddling l is split there, surviving pieces
keep their density shape, and weights are renormalized.  All moments used by
query scoring have closed forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

WEIGHT_TOLERANCE = 1e-12
COMPACTION_THRESHOLD = 64
MERGE_RELATIVE_DENSITY = 1e-9


class BeliefError(ValueError):
    pass


def _phi(x: float) -> float:
    """Standard normal CDF."""
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


@dataclass(frozen=True)
class UniformMixture:
    """Weighted uniform components on [0, 1].

    Components are kept sorted by lower bound; intervals are half-open
    [lower, upper) except the last, which is closed at 1.  The convention
    only matters for tie-handling at breakpoints; every probability below is
    computed from interval measure.
    """

    lowers: tuple[float, ...]
    uppers: tuple[float, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        if not self.lowers:
            raise BeliefError("mixture needs at least one component")
        for lo, up, w in zip(self.lowers, self.uppers, self.weights):
            if not (0.0 <= lo < up <= 1.0):
                raise BeliefError(f"component [{lo}, {up}] outside the unit interval or empty")
            if w <= 0.0:
                raise BeliefError("component weights must be positive")
        if abs(sum(self.weights) - 1.0) > WEIGHT_TOLERANCE:
            raise BeliefError(f"weights sum to {sum(self.weights)}, expected 1")
        if any(a > b for a, b in zip(self.lowers, self.lowers[1:])):
            raise BeliefError("components must be sorted by lower bound")

    # --- constructors -------------------------------------------------

    @classmethod
    def uniform(cls) -> "UniformMixture":
        return cls(lowers=(0.0,), uppers=(1.0,), weights=(1.0,))

    @classmethod
    def from_components(cls, components: Iterable[tuple[float, float, float]]) -> "UniformMixture":
        comps = sorted(components, key=lambda c: (c[0], c[1]))
        total = sum(c[2] for c in comps)
        if total <= 0:
            raise BeliefError("total weight must be positive")
        return cls(
            lowers=tuple(c[0] for c in comps),
            uppers=tuple(c[1] for c in comps),
            weights=tuple(c[2] / total for c in comps),
        )

    @classmethod
    def fit_truncated_gaussian(cls, mean: float, variance: float, k: int) -> "UniformMixture":
        """k equal-width components on [0, 1], each weighted by the Gaussian
        mass of its bin, renormalized over the unit interval."""
        if variance <= 0:
            raise BeliefError("variance must be positive")
        if k < 1:
            raise BeliefError("need at least one component")
        sigma = math.sqrt(variance)
        edges = [i / k for i in range(k + 1)]
        masses = [
            _phi((edges[i + 1] - mean) / sigma) - _phi((edges[i] - mean) / sigma)
            for i in range(k)
        ]
        return cls.from_components(
            (edges[i], edges[i + 1], masses[i]) for i in range(k) if masses[i] > 0
        )

    @classmethod
    def random_mixture(cls, rng: np.random.Generator, k: int = 5) -> "UniformMixture":
        """Random contiguous mixture: sorted uniform breakpoints, symmetric
        Dirichlet weights.  Stand-in construction for "random mixture" priors
        whose exact recipe is a free choice; documented here."""
        while True:
            cuts = np.sort(rng.uniform(0.0, 1.0, size=k - 1))
            edges = np.concatenate([[0.0], cuts, [1.0]])
            if np.min(np.diff(edges)) > 1e-6:
                break
        weights = rng.dirichlet(np.ones(k))
        return cls.from_components(
            (float(edges[i]), float(edges[i + 1]), float(weights[i])) for i in range(k)
        )

    # --- moments --------------------------------------------------------

    @property
    def mean(self) -> float:
        return float(
            sum(w * (lo + up) / 2.0 for lo, up, w in zip(self.lowers, self.uppers, self.weights))
        )

    def mass_above(self, l: float) -> float:
        """P(v >= l)."""
        total = 0.0
        for lo, up, w in zip(self.lowers, self.uppers, self.weights):
            if l <= lo:
                total += w
            elif l < up:
                total += w * (up - l) / (up - lo)
        return total

    def first_moment_above(self, l: float) -> float:
        """E[v * 1{v >= l}]."""
        total = 0.0
        for lo, up, w in zip(self.lowers, self.uppers, self.weights):
            if l <= lo:
                total += w * (lo + up) / 2.0
            elif l < up:
                total += w * (up - l) / (up - lo) * (l + up) / 2.0
        return total

    def prob_yes(self, l: float) -> float:
        """Probability of a yes response to "is the value at least l?"."""
        if not 0.0 <= l <= 1.0:
            raise BeliefError(f"threshold {l} outside [0, 1]")
        return self.mass_above(l)

    def mean_above(self, l: float) -> float:
        """E[v | v >= l]; the posterior mean after a yes response."""
        g = self.mass_above(l)
        if g <= 0.0:
            raise BeliefError(f"conditioning on zero-probability event v >= {l}")
        return self.first_moment_above(l) / g

    def mean_below(self, l: float) -> float:
        """E[v | v < l]; the posterior mean after a no response."""
        below = 1.0 - self.mass_above(l)
        if below <= 0.0:
            raise BeliefError(f"conditioning on zero-probability event v < {l}")
        return (self.mean - self.first_moment_above(l)) / below

    # vectorized forms of the two quantities query scoring needs
    def mass_and_moment_above(self, ls: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        lo = np.asarray(self.lowers)[:, None]
        up = np.asarray(self.uppers)[:, None]
        w = np.asarray(self.weights)[:, None]
        l = np.asarray(ls, dtype=float)[None, :]
        cut = np.clip(l, lo, up)
        frac = (up - cut) / (up - lo)
        mass = (w * frac).sum(axis=0)
        moment = (w * frac * (cut + up) / 2.0).sum(axis=0)
        return mass, moment

    @property
    def breakpoints(self) -> list[float]:
        pts = sorted(set(self.lowers) | set(self.uppers))
        return pts

    def density(self, x: float) -> float:
        total = 0.0
        last = len(self.lowers) - 1
        for i, (lo, up, w) in enumerate(zip(self.lowers, self.uppers, self.weights)):
            closed_right = i == last and up == 1.0
            if lo <= x < up or (closed_right and x == up):
                total += w / (up - lo)
        return total

    def cdf(self, x: float) -> float:
        if x <= 0.0:
            return 0.0
        total = 0.0
        for lo, up, w in zip(self.lowers, self.uppers, self.weights):
            if x >= up:
                total += w
            elif x > lo:
                total += w * (x - lo) / (up - lo)
        return total

    # --- updates --------------------------------------------------------

    def update(self, l: float, response: str) -> "UniformMixture":
        """Exact Bayesian conditioning on {v >= l} (yes) or {v < l} (no)."""
        if not 0.0 <= l <= 1.0:
            raise BeliefError(f"threshold {l} outside [0, 1]")
        if response not in ("yes", "no"):
            raise BeliefError(f"response must be yes or no, got {response!r}")
        kept: list[tuple[float, float, float]] = []
        for lo, up, w in zip(self.lowers, self.uppers, self.weights):
            if response == "yes":
                left, right = max(lo, l), up
            else:
                left, right = lo, min(up, l)
            if right > left:
                kept.append((left, right, w * (right - left) / (up - lo)))
        total = sum(w for _, _, w in kept)
        if not kept or total <= 0.0:
            raise BeliefError(
                f"response {response!r} at threshold {l} has zero probability under the belief"
            )
        mixture = UniformMixture(
            lowers=tuple(c[0] for c in kept),
            uppers=tuple(c[1] for c in kept),
            weights=tuple(c[2] / total for c in kept),
        )
        if len(mixture.lowers) > COMPACTION_THRESHOLD:
            mixture = mixture.compact()
        return mixture

    def compact(self) -> "UniformMixture":
        """Merge adjacent contiguous components of near-identical density."""
        comps = list(zip(self.lowers, self.uppers, self.weights))
        merged: list[tuple[float, float, float]] = [comps[0]]
        for lo, up, w in comps[1:]:
            plo, pup, pw = merged[-1]
            d_prev = pw / (pup - plo)
            d_cur = w / (up - lo)
            if pup == lo and abs(d_prev - d_cur) <= MERGE_RELATIVE_DENSITY * max(d_prev, d_cur):
                merged[-1] = (plo, up, pw + w)
            else:
                merged.append((lo, up, w))
        total = sum(w for _, _, w in merged)
        return UniformMixture(
            lowers=tuple(c[0] for c in merged),
            uppers=tuple(c[1] for c in merged),
            weights=tuple(c[2] / total for c in merged),
        )

    def sample(self, rng: np.random.Generator) -> float:
        k = int(rng.choice(len(self.weights), p=np.asarray(self.weights) / sum(self.weights)))
        return float(rng.uniform(self.lowers[k], self.uppers[k]))


@dataclass
class ParameterBelief:
    """Independent mixtures for every free local value parameter, keyed by
    (factor id, configuration index)."""

    mixtures: dict[tuple[int, int], UniformMixture]

    @classmethod
    def from_prior_factory(cls, model, factory) -> "ParameterBelief":
        """``factory(factor_id, config_index) -> UniformMixture`` for every
        free parameter of the model."""
        from .elicitation import free_configs

        out = {}
        for f in model.factors:
            for idx in free_configs(model, f.id):
                out[(f.id, idx)] = factory(f.id, idx)
        return cls(mixtures=out)

    @classmethod
    def uniform_priors(cls, model) -> "ParameterBelief":
        return cls.from_prior_factory(model, lambda f, i: UniformMixture.uniform())

    def get(self, factor_id: int, config_index: int) -> UniformMixture:
        return self.mixtures[(factor_id, config_index)]

    def updated(self, factor_id: int, config_index: int, l: float, response: str) -> "ParameterBelief":
        key = (factor_id, config_index)
        new = dict(self.mixtures)
        new[key] = new[key].update(l, response)
        return ParameterBelief(mixtures=new)

    def expected_values_with_pins(self, model, anchors, factor_id: int) -> np.ndarray:
        """Vector of expected local values over all configurations of the
        factor, pinned configurations included at their fixed values."""
        from .elicitation import pin_value, pinned_configs

        vec = np.empty(model.config_count(factor_id))
        for idx, kind in pinned_configs(model, factor_id).items():
            vec[idx] = pin_value(kind, anchors, factor_id)
        for (fid, idx), mix in self.mixtures.items():
            if fid == factor_id:
                vec[idx] = mix.mean
        return vec
