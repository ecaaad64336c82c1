"""Fixed-size sampling designs: SRSWOR and stratified SRSWOR.

Both designs are handled as stratified simple random sampling without
replacement; plain SRSWOR is the one-stratum case. Units are 0-based row
indices, stratum labels are 1-based.

Random draws are reproducible across platforms. For a sample seed ``s`` the
units of stratum ``h`` are drawn with ``PCG64(SeedSequence([s, h]))``, so
strata use independent streams and the result does not depend on the order
in which strata are processed. Within a stratum, a partial Fisher-Yates
shuffle of the sorted member indices is run: for ``i = 0..n_h-1`` a position
``j`` uniform on ``[i, N_h)`` is drawn (one vectorised ``Generator.integers``
call) and positions ``i`` and ``j`` are swapped. The first ``n_h`` positions
form the stratum sample.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import EnumerationTooLargeError, VarianceNotEstimableError

ENUMERATION_LIMIT = 10**6


def stratum_rng(seed: int, h: int) -> np.random.Generator:
    """Random stream used for stratum ``h`` of a draw with ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(h)])))


def partial_fisher_yates(pool: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """First ``n`` entries of a partially shuffled copy of ``pool``."""
    a = np.array(pool, copy=True)
    if n == 0:
        return a[:0]
    js = rng.integers(np.arange(n), a.size)
    for i, j in enumerate(js.tolist()):
        a[i], a[j] = a[j], a[i]
    return a[:n]


@dataclass(frozen=True, eq=False)
class Sample:
    """Sorted 0-based unit indices drawn under ``design``."""

    indices: np.ndarray
    design: "SamplingDesign"
    seed: Optional[int] = None

    def __post_init__(self):
        idx = np.array(self.indices, dtype=np.int64)
        idx.sort()
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)

    @property
    def n(self) -> int:
        return self.indices.size

    def indicators(self) -> np.ndarray:
        """Membership indicators ``I_k`` over the whole population."""
        ind = np.zeros(self.design.N, dtype=bool)
        ind[self.indices] = True
        return ind


class SamplingDesign:
    """Stratified simple random sampling without replacement.

    Parameters
    ----------
    labels : array of int
        Stratum label in ``1..H`` for each of the ``N`` units.
    allocation : sequence of int
        Sample size ``n_h`` for each stratum, ``1 <= n_h <= N_h``.
    """

    kind = "stratified"

    def __init__(self, labels, allocation):
        labels = np.array(labels, dtype=np.int64)
        if labels.ndim != 1 or labels.size < 1:
            raise ValueError("labels must be a nonempty 1-D array")
        H = int(labels.max())
        if labels.min() < 1:
            raise ValueError("stratum labels start at 1")
        N_h = np.bincount(labels, minlength=H + 1)[1:]
        if np.any(N_h == 0):
            raise ValueError("every stratum 1..H must be nonempty")
        n_h = np.array(allocation, dtype=np.int64).reshape(-1)
        if n_h.size != H:
            raise ValueError(f"allocation has {n_h.size} entries for {H} strata")
        if np.any(n_h < 1) or np.any(n_h > N_h):
            raise ValueError(f"need 1 <= n_h <= N_h; got n_h={n_h.tolist()}, N_h={N_h.tolist()}")
        if np.any((n_h < 2) & (N_h >= 2)):
            warnings.warn(
                "a stratum has n_h = 1: some joint inclusion probabilities are zero "
                "and the variance cannot be estimated",
                stacklevel=2,
            )
        labels.setflags(write=False)
        N_h.setflags(write=False)
        n_h.setflags(write=False)
        self.labels = labels
        self.N_h = N_h
        self.n_h = n_h
        self._members = [np.flatnonzero(labels == h) for h in range(1, H + 1)]

    def __repr__(self):
        return f"{type(self).__name__}(N_h={self.N_h.tolist()}, n_h={self.n_h.tolist()})"

    # sizes
    @property
    def N(self) -> int:
        return self.labels.size

    @property
    def n(self) -> int:
        return int(self.n_h.sum())

    @property
    def H(self) -> int:
        return self.N_h.size

    def members(self, h: int) -> np.ndarray:
        """Unit indices of stratum ``h`` (1-based)."""
        return self._members[h - 1]

    # per-stratum inclusion probabilities
    @property
    def stratum_pi(self) -> np.ndarray:
        return self.n_h / self.N_h

    @property
    def stratum_pi2(self) -> np.ndarray:
        """Within-stratum joint inclusion probability (NaN when ``N_h = 1``)."""
        N_h = self.N_h.astype(float)
        n_h = self.n_h.astype(float)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = n_h * (n_h - 1) / (N_h * (N_h - 1))
        return np.where(self.N_h >= 2, out, np.nan)

    @property
    def variance_estimable(self) -> bool:
        """True when every within-stratum pair can be drawn together."""
        return bool(np.all((self.n_h >= 2) | (self.N_h == 1)))

    def require_estimable(self):
        if not self.variance_estimable:
            bad = (np.flatnonzero((self.n_h < 2) & (self.N_h >= 2)) + 1).tolist()
            raise VarianceNotEstimableError(
                f"strata {bad} have n_h = 1; the variance estimator needs n_h >= 2"
            )

    # inclusion probabilities
    def _check_unit(self, k):
        if not 0 <= k < self.N:
            raise IndexError(f"unit index {k} outside 0..{self.N - 1}")

    def pi1(self, k: int) -> float:
        self._check_unit(k)
        return float(self.stratum_pi[self.labels[k] - 1])

    def pi1_all(self) -> np.ndarray:
        return self.stratum_pi[self.labels - 1]

    def pi2(self, k: int, l: int) -> float:
        self._check_unit(k)
        self._check_unit(l)
        if k == l:
            raise ValueError("pi2 needs distinct units; use pi1 for k == l")
        g, h = self.labels[k] - 1, self.labels[l] - 1
        if g == h:
            return float(self.stratum_pi2[g])
        return float(self.stratum_pi[g] * self.stratum_pi[h])

    def pi2_matrix(self, indices=None) -> np.ndarray:
        """Joint inclusion probabilities among ``indices``, ``pi_k`` on the diagonal."""
        idx = np.arange(self.N) if indices is None else np.asarray(indices)
        lab = self.labels[idx] - 1
        pi = self.stratum_pi[lab]
        same = lab[:, None] == lab[None, :]
        out = np.where(same, self.stratum_pi2[lab][:, None], np.outer(pi, pi))
        np.fill_diagonal(out, pi)
        return out

    def delta(self, k: int, l: int) -> float:
        if k == l:
            p = self.pi1(k)
            return p * (1.0 - p)
        return self.pi2(k, l) - self.pi1(k) * self.pi1(l)

    def delta_matrix(self, indices=None) -> np.ndarray:
        """``Delta_kl = pi_kl - pi_k pi_l`` among ``indices`` (diagonal ``pi_k(1-pi_k)``)."""
        idx = np.arange(self.N) if indices is None else np.asarray(indices)
        pi = self.pi1_all()[idx]
        out = self.pi2_matrix(idx) - np.outer(pi, pi)
        np.fill_diagonal(out, pi * (1.0 - pi))
        # cross-stratum pairs are independent: make the zero exact
        lab = self.labels[idx]
        out[lab[:, None] != lab[None, :]] = 0.0
        return out

    # drawing
    def draw(self, seed: Optional[int] = None) -> Sample:
        """Draw one sample; identical seeds give identical samples."""
        if seed is None:
            seed = int(np.random.SeedSequence().generate_state(1, np.uint64)[0])
        seed = int(seed)
        if seed < 0:
            raise ValueError("seeds must be nonnegative integers")
        parts = [
            partial_fisher_yates(self._members[h], int(self.n_h[h]), stratum_rng(seed, h + 1))
            for h in range(self.H)
        ]
        return Sample(np.concatenate(parts), self, seed)

    def count_samples(self) -> int:
        return math.prod(math.comb(int(N), int(n)) for N, n in zip(self.N_h, self.n_h))

    def enumerate_samples(self, limit: int = ENUMERATION_LIMIT):
        """Every possible sample with its design probability.

        Returns a list of ``(Sample, probability)`` pairs. Raises
        :class:`EnumerationTooLargeError` above ``limit`` samples.
        """
        count = self.count_samples()
        if count > limit:
            raise EnumerationTooLargeError(count, limit)
        p = 1.0 / count
        per_stratum = [
            itertools.combinations(self._members[h].tolist(), int(self.n_h[h]))
            for h in range(self.H)
        ]
        return [
            (Sample(np.concatenate([np.array(c, dtype=np.int64) for c in combo]), self), p)
            for combo in itertools.product(*per_stratum)
        ]


class StratifiedSRSWOR(SamplingDesign):
    """Independent SRSWOR of size ``n_h`` in every stratum."""


class SRSWOR(SamplingDesign):
    """Simple random sampling without replacement of ``n`` among ``N`` units."""

    kind = "srswor"

    def __init__(self, N: int, n: int):
        if not 1 <= n <= N:
            raise ValueError(f"need 1 <= n <= N, got n={n}, N={N}")
        super().__init__(np.ones(int(N), dtype=np.int64), [int(n)])

    def __repr__(self):
        return f"SRSWOR(N={self.N}, n={self.n})"


def census(N: int) -> SRSWOR:
    """The design that always selects every unit."""
    return SRSWOR(N, N)


def design_from_config(config: dict, pop, summaries=None) -> SamplingDesign:
    """Build a design for ``pop`` from its JSON description.

    Accepted forms::

        {"kind": "srswor", "n": 200}
        {"kind": "census"}
        {"kind": "stratified", "allocation": [50, 50, 50, 50]}
        {"kind": "stratified", "rule": "proportional" | "optimal", "n": 200}
    """
    from .allocate import optimal_allocation, proportional_allocation, stratum_summaries

    kind = config.get("kind")
    if kind == "srswor":
        return SRSWOR(pop.N, int(config["n"]))
    if kind == "census":
        return census(pop.N)
    if kind == "stratified":
        if pop.strata is None:
            raise ValueError("stratified design requires a population with strata")
        if "allocation" in config:
            return StratifiedSRSWOR(pop.strata, config["allocation"])
        rule = config.get("rule")
        if summaries is None:
            summaries = stratum_summaries(pop)
        if rule == "proportional":
            alloc = proportional_allocation(summaries, int(config["n"]))
        elif rule == "optimal":
            alloc = optimal_allocation(summaries, int(config["n"]))
        else:
            raise ValueError(f"stratified design needs 'allocation' or a known 'rule', got {rule!r}")
        return StratifiedSRSWOR(pop.strata, alloc.n_h)
    raise ValueError(f"unknown design kind {kind!r}")
