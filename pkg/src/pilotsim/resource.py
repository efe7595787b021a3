"""Computing sites, batch-queue wait models, and capability snapshots.

Queue waits are sampled from per-site seeded streams so that replays are
draw-for-draw identical. Fair-share and per-user queue policies are folded
into the wait distribution rather than modeled explicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import CapacityExceededError, InvalidArgumentError


class QueueModelKind(str, Enum):
    CONSTANT = "constant"
    UNIFORM = "uniform"
    LOGNORMAL = "lognormal"
    TRACE_REPLAY = "trace_replay"


@dataclass(frozen=True)
class QueueModel:
    """Stochastic model of a site's batch-queue wait.

    parameters by kind:
      constant:     (wait_s,)
      uniform:      (low_s, high_s)
      lognormal:    (mu_log, sigma_log)  -- parameters of the underlying normal
      trace_replay: tuple of waits consumed sequentially
    size_penalty_s_per_core adds a deterministic term proportional to the
    requested pilot size; larger pilots wait longer in expectation.
    """

    kind: QueueModelKind
    parameters: tuple[float, ...]
    size_penalty_s_per_core: float = 0.0
    seed_offset: int = 0

    def __post_init__(self):
        k, p = self.kind, self.parameters
        if k is QueueModelKind.CONSTANT and (len(p) != 1 or p[0] < 0):
            raise InvalidArgumentError("constant model needs one nonnegative wait")
        if k is QueueModelKind.UNIFORM and (len(p) != 2 or p[0] < 0 or p[1] < p[0]):
            raise InvalidArgumentError("uniform model needs 0 <= low <= high")
        if k is QueueModelKind.LOGNORMAL and (len(p) != 2 or p[1] < 0):
            raise InvalidArgumentError("lognormal model needs (mu_log, sigma_log >= 0)")
        if k is QueueModelKind.TRACE_REPLAY and (not p or any(w < 0 for w in p)):
            raise InvalidArgumentError("trace_replay model needs nonnegative waits")
        if self.size_penalty_s_per_core < 0:
            raise InvalidArgumentError("size_penalty_s_per_core must be >= 0")

    def mean_wait_s(self) -> float:
        p = self.parameters
        if self.kind is QueueModelKind.CONSTANT:
            return p[0]
        if self.kind is QueueModelKind.UNIFORM:
            return (p[0] + p[1]) / 2.0
        if self.kind is QueueModelKind.LOGNORMAL:
            return math.exp(p[0] + p[1] ** 2 / 2.0)
        return sum(p) / len(p)


@dataclass(frozen=True)
class Site:
    """A computing site: a resource manager fronting a pool of cores."""

    name: str
    total_cores: int
    queue_model: QueueModel
    max_concurrent_pilots: int = 20
    bandwidth_bytes_per_s: float = 10e6
    staging_latency_s: float = 0.0

    def __post_init__(self):
        if self.total_cores < 1:
            raise InvalidArgumentError(f"site {self.name!r}: total_cores must be >= 1")
        if self.max_concurrent_pilots < 1:
            raise InvalidArgumentError(
                f"site {self.name!r}: max_concurrent_pilots must be >= 1"
            )
        if self.bandwidth_bytes_per_s <= 0:
            raise InvalidArgumentError(
                f"site {self.name!r}: bandwidth_bytes_per_s must be > 0"
            )
        if self.staging_latency_s < 0:
            raise InvalidArgumentError(
                f"site {self.name!r}: staging_latency_s must be >= 0"
            )

    def staging_time_s(self, size_bytes: int) -> float:
        """Transfer time for one file between workstation and site."""
        return self.staging_latency_s + size_bytes / self.bandwidth_bytes_per_s


@dataclass(frozen=True)
class CapabilitySnapshot:
    """Point-in-time view of a site's capabilities, as a resource-information
    service would report them."""

    site_name: str
    free_cores: int
    queued_pilots: int
    mean_wait_s: float

    def __post_init__(self):
        if self.free_cores < 0 or self.queued_pilots < 0 or self.mean_wait_s < 0:
            raise InvalidArgumentError("snapshot estimates must be >= 0")


def sample_queue_wait(
    site: Site,
    pilot_cores: int,
    rng_stream: np.random.Generator,
    draw_index: int = 0,
) -> float:
    """Sample the queue wait for one pilot submission on ``site``.

    ``draw_index`` is only consulted by the trace_replay model, which consumes
    its wait list sequentially (cycling if exhausted). Stochastic models draw
    from ``rng_stream``, so replaying the same stream replays the same waits.
    """
    if pilot_cores > site.total_cores:
        raise CapacityExceededError(
            f"pilot of {pilot_cores} cores exceeds site {site.name!r} "
            f"({site.total_cores} cores)"
        )
    m = site.queue_model
    if m.kind is QueueModelKind.CONSTANT:
        wait = m.parameters[0]
    elif m.kind is QueueModelKind.UNIFORM:
        wait = float(rng_stream.uniform(m.parameters[0], m.parameters[1]))
    elif m.kind is QueueModelKind.LOGNORMAL:
        wait = float(rng_stream.lognormal(m.parameters[0], m.parameters[1]))
    else:
        wait = m.parameters[draw_index % len(m.parameters)]
    wait += m.size_penalty_s_per_core * pilot_cores
    if not math.isfinite(wait) or wait < 0:
        raise InvalidArgumentError(f"sampled wait is not a finite nonnegative value: {wait}")
    return wait


class WaitSampler:
    """Per-site seeded wait streams for one simulation run.

    Each site gets an independent generator derived from (run seed, site
    seed offset, site index), so adding a site never perturbs the waits of
    the others and identical seeds reproduce identical waits bit-for-bit.
    """

    def __init__(self, sites: Sequence[Site], seed: int):
        self.seed = seed
        self._sites = {s.name: s for s in sites}
        self._gens = {
            s.name: np.random.default_rng([seed, s.queue_model.seed_offset, i])
            for i, s in enumerate(sites)
        }
        self._draws = {s.name: 0 for s in sites}

    def sample(self, site_name: str, pilot_cores: int) -> float:
        site = self._sites[site_name]
        idx = self._draws[site_name]
        self._draws[site_name] = idx + 1
        return sample_queue_wait(site, pilot_cores, self._gens[site_name], idx)


def bundle_query(sites: Iterable[Site], pilots: Iterable, now: float = 0.0):
    """One capability snapshot per site, reflecting the given pilot set.

    ``pilots`` is any iterable of objects carrying ``state`` (with a
    ``.value`` of "queued"/"active"), a ``description.site_name``, and
    ``description.cores``; typically the simulator's pilot collection.
    """
    by_site_active: dict[str, int] = {}
    by_site_queued: dict[str, int] = {}
    for p in pilots:
        state = getattr(p.state, "value", p.state)
        site = p.description.site_name
        if state == "active":
            by_site_active[site] = by_site_active.get(site, 0) + p.description.cores
        elif state == "queued":
            by_site_queued[site] = by_site_queued.get(site, 0) + 1
    return [
        CapabilitySnapshot(
            site_name=s.name,
            free_cores=max(0, s.total_cores - by_site_active.get(s.name, 0)),
            queued_pilots=by_site_queued.get(s.name, 0),
            mean_wait_s=s.queue_model.mean_wait_s(),
        )
        for s in sites
    ]
