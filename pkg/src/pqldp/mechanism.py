"""Warner randomized response over bits and over large sparse domains."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

INT64_MAX = np.iinfo(np.int64).max

# default ceiling on injected noisy members per call; keeps an accidental
# huge domain from exhausting memory
MAX_INJECTED = 50_000_000

CORRECTIONS = ("exact", "first_order")


def flip_prob(epsilon: float) -> float:
    """RR flip probability ``1 / (e^eps + 1)``; ``inf`` gives the noiseless limit 0."""
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    # 1/(e^eps+1) written via exp(-eps) so large eps underflows cleanly to 0
    t = math.exp(-epsilon)
    return t / (1.0 + t)


def privacy_ratio(mu: float) -> float:
    """Worst-case probability ratio ``(1 - mu) / mu`` of a single RR bit."""
    if not 0 < mu < 0.5:
        raise ValueError(f"mu must lie in (0, 0.5), got {mu}")
    return (1.0 - mu) / mu


@dataclass(frozen=True)
class PrivacyParams:
    """Mechanism and estimator settings shared by both protocols.

    ``correction`` picks the per-user estimator: ``"exact"`` expands every
    noisy indicator as ``(b - mu) / (1 - 2 mu)``, which is unbiased for any
    p and q; ``"first_order"`` is the single-term ``(f - mu s)`` form.
    ``literal_rr`` perturbs only the positions that are set (no injection);
    it does not satisfy LDP and exists for comparison only.
    """

    epsilon: float
    k: int = 2
    rho: float = 1.0
    abs_correction: bool = False
    sampling_rescale: bool = True
    literal_rr: bool = False
    correction: str = "exact"

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not 0 < self.rho <= 1:
            raise ValueError(f"rho must lie in (0, 1], got {self.rho}")
        if self.correction not in CORRECTIONS:
            raise ValueError(f"correction must be one of {CORRECTIONS}, got {self.correction!r}")

    @property
    def mu(self) -> float:
        return flip_prob(self.epsilon)


def user_rng(master_seed: int, round_no: int, user: int) -> np.random.Generator:
    """Independent stream for one user in one protocol round.

    Derived from (master, round, user) through ``SeedSequence`` so results do
    not depend on the order users are processed in.
    """
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(round_no, user)))


def derive_seed(master_seed: int, *keys: int) -> int:
    """Deterministic 63-bit child seed of ``master_seed`` for the given key path."""
    words = np.random.SeedSequence(master_seed, spawn_key=tuple(keys)).generate_state(2, np.uint32)
    return (int(words[0]) << 31) ^ int(words[1])


def rr_bit(bit: int, mu: float, rng: np.random.Generator) -> int:
    if not 0 <= mu <= 0.5:
        raise ValueError(f"mu must lie in [0, 0.5], got {mu}")
    return int(bit) ^ int(rng.random() < mu)


def dense_rr(bits, mu: float, rng: np.random.Generator) -> list[int]:
    """Per-position reference: :func:`rr_bit` on every bit."""
    return [rr_bit(b, mu, rng) for b in bits]


def _nth_non_members(j: np.ndarray, members: np.ndarray) -> np.ndarray:
    # members sorted; the j-th non-member is j plus the members at or below it
    shifted = members - np.arange(len(members), dtype=np.int64)
    return j + np.searchsorted(shifted, j, side="right")


def sparse_rr(
    true_set,
    domain_size: int,
    mu: float,
    rng: np.random.Generator,
    max_injected: int = MAX_INJECTED,
) -> np.ndarray:
    """RR over ``domain_size`` positions without materializing the domain.

    Equivalent in distribution to :func:`rr_bit` on every position: each
    member of ``true_set`` survives with probability ``1 - mu`` and a
    Binomial(domain_size - |true_set|, mu) number of distinct non-members,
    chosen uniformly, is added. Returns the noisy set as a sorted int64 array.
    """
    members = np.unique(np.asarray(list(true_set), dtype=np.int64))
    t = len(members)
    if domain_size == 0 and t:
        raise ValueError("non-empty true set over an empty domain")
    if t and (members[0] < 0 or members[-1] >= domain_size):
        raise ValueError("true set contains indices outside the domain")
    if not 0 <= mu <= 0.5:
        raise ValueError(f"mu must lie in [0, 0.5], got {mu}")
    if domain_size > INT64_MAX:
        raise ValueError(f"domain of size {domain_size} is too large to simulate")
    kept = members[rng.random(t) >= mu] if t else members
    free = domain_size - t
    n_inj = int(rng.binomial(free, mu)) if free > 0 and mu > 0 else 0
    if n_inj == 0:
        return kept
    if n_inj > max_injected:
        raise ValueError(f"RR would inject {n_inj} noisy positions (cap {max_injected})")
    j = rng.choice(free, size=n_inj, replace=False).astype(np.int64)
    injected = _nth_non_members(np.sort(j), members)
    return np.union1d(kept, injected)


def rr_existing_only(true_set, mu: float, rng: np.random.Generator) -> np.ndarray:
    """Flip only the set positions: each member survives with probability ``1 - mu``."""
    members = np.unique(np.asarray(list(true_set), dtype=np.int64))
    return members[rng.random(len(members)) >= mu]
