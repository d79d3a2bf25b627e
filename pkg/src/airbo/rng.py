"""Named, independently seeded random streams.

Every stochastic component draws from its own stream derived from
``(master seed, name...)``, so adding diagnostics or extra runs never
perturbs existing draws. Derivation goes through SHA-256 of the name
parts, which is stable across platforms and Python versions.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np


def stream(seed: int, *names: object) -> np.random.Generator:
    """Return a Generator for the stream identified by ``(seed, *names)``."""
    key = tuple(
        int.from_bytes(hashlib.sha256(repr(n).encode("utf-8")).digest()[:4], "little")
        for n in names
    )
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


@dataclass
class ChainRngs:
    """The three streams used by one MCMC chain.

    Proposals and accept/reject draws are kept separate so the chain
    trajectory is invariant to how many diagnostics are computed.
    """

    seed: int
    theta_proposals: np.random.Generator = field(init=False)
    eta_proposals: np.random.Generator = field(init=False)
    accept: np.random.Generator = field(init=False)

    def __post_init__(self) -> None:
        self.theta_proposals = stream(self.seed, "theta-proposals")
        self.eta_proposals = stream(self.seed, "eta-proposals")
        self.accept = stream(self.seed, "accept")
