"""Random sensor-placement baselines.

Two flavours: uniform draws over all candidates (with replacement) and
uniform draws over unvisited candidates only. Readings are noise-free,
so the without-replacement variant explores strictly more efficiently.
Each (snapshot, run) pair gets its own derived random stream, so adding
runs never perturbs earlier ones.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .data import Snapshot
from .errors import InputError
from .rng import stream
from .traces import BoTrace


class BaselineKind(enum.Enum):
    WITH_REPLACEMENT = "with-replacement"
    WITHOUT_REPLACEMENT = "without-replacement"


@dataclass(frozen=True)
class BaselinePolicy:
    kind: BaselineKind
    n_runs: int = 100
    seed: int = 13

    def __post_init__(self) -> None:
        if self.n_runs < 1:
            raise InputError(f"n_runs must be >= 1, got {self.n_runs}")


def run_baseline(snapshot: Snapshot, policy: BaselinePolicy, n_iter: int) -> list[BoTrace]:
    """Produce ``n_runs`` independent random placement traces."""
    if snapshot.values_pre is None:
        raise InputError(f"snapshot {snapshot.id} is not preprocessed")
    candidates = snapshot.candidate_indices
    if len(candidates) == 0:
        raise InputError(f"snapshot {snapshot.id} has no candidates")
    without = policy.kind is BaselineKind.WITHOUT_REPLACEMENT
    if without and n_iter > len(candidates):
        raise InputError(
            f"without-replacement needs n_iter <= {len(candidates)} candidates, "
            f"got n_iter={n_iter}"
        )
    traces = []
    for run in range(policy.n_runs):
        rng = stream(policy.seed, "baseline", snapshot.id, run)
        trace = BoTrace(snapshot_id=snapshot.id)
        if without:
            chosen = rng.choice(candidates, size=n_iter, replace=False)
        else:
            chosen = rng.choice(candidates, size=n_iter, replace=True)
        for i, idx in enumerate(map(int, chosen)):
            x, y = snapshot.locations[idx]
            trace.append_observation(
                i + 1, float(x), float(y),
                float(snapshot.values_raw[idx]), float(snapshot.values_pre[idx]),
            )
        traces.append(trace)
    return traces
