"""Asynchronous search strategies behind one dispatch/receive contract.

A strategy never waits on outstanding evaluations: ``dispatch`` always
produces the next candidate from current state, and ``receive`` is the only
state mutation path. The orchestrator serializes all calls, so strategies
need no locking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from . import pareto
from .space import (OriginTag, Pipeline, SearchSpace, SpaceError, canonical_decode,
                    sample_pipeline, mutate, crossover)

__all__ = ["CandidateRequest", "RandomSearch", "AshaSearch", "EvolutionSearch",
           "STRATEGIES", "create_strategy"]


@dataclass(frozen=True)
class CandidateRequest:
    pipeline: Pipeline
    fidelity: float
    origin: OriginTag


class RandomSearch:
    """Uniform sampling at full fidelity; receive is a no-op."""

    def __init__(self, space: SearchSpace):
        self.space = space

    def dispatch(self, rng) -> CandidateRequest:
        return CandidateRequest(sample_pipeline(self.space, rng), 1.0,
                                OriginTag("random"))

    def receive(self, result) -> None:
        pass


@dataclass
class _Rung:
    fidelity: float
    entries: list = field(default_factory=list)  # (eval_id, score, pipeline_str)
    promoted: set = field(default_factory=set)


def asha_fidelities(min_fidelity: float, eta: int) -> list[float]:
    """Rung fidelity ladder min_fidelity * eta^k, capped by a final 1.0 rung."""
    fids = []
    k = 0
    while True:
        f = min_fidelity * eta ** k
        if f >= 1.0 - 1e-9:
            break
        fids.append(f)
        k += 1
    fids.append(1.0)
    return fids


class AshaSearch:
    """Asynchronous successive halving: cheap low-fidelity evaluations feed
    the bottom rung, and any entry ranked in the top floor(n/eta) of its rung
    is promoted by re-evaluating its pipeline at the next rung's fidelity."""

    def __init__(self, space: SearchSpace, eta: int = 3, min_fidelity: float = 1 / 9):
        if eta < 2:
            raise ValueError(f"reduction factor must be >= 2, got {eta}")
        if not 0.0 < min_fidelity <= 1.0:
            raise ValueError(f"min_fidelity must be in (0, 1], got {min_fidelity}")
        self.space = space
        self.eta = int(eta)
        self.rungs = [_Rung(f) for f in asha_fidelities(min_fidelity, eta)]

    def _promotable(self, rung: _Rung):
        """Best not-yet-promoted entry in the rung's top floor(n/eta), if any."""
        slots = len(rung.entries) // self.eta
        if slots == 0:
            return None
        ranked = sorted(rung.entries, key=lambda e: -e[1])  # stable: ties by arrival
        for entry in ranked[:slots]:
            if entry[0] not in rung.promoted and entry[1] != float("-inf"):
                return entry
        return None

    def dispatch(self, rng) -> CandidateRequest:
        for k in range(len(self.rungs) - 2, -1, -1):
            entry = self._promotable(self.rungs[k])
            if entry is not None:
                eval_id, _, pipeline_str = entry
                self.rungs[k].promoted.add(eval_id)
                return CandidateRequest(canonical_decode(pipeline_str, self.space),
                                        self.rungs[k + 1].fidelity,
                                        OriginTag("promotion", None, (eval_id,)))
        return CandidateRequest(sample_pipeline(self.space, rng),
                                self.rungs[0].fidelity, OriginTag("random"))

    def receive(self, result) -> None:
        for rung in self.rungs:
            if math.isclose(rung.fidelity, result.fidelity, rel_tol=0, abs_tol=1e-12):
                score = result.objectives[0] if result.status == "ok" else float("-inf")
                rung.entries.append((result.eval_id, score, result.pipeline))
                return
        raise ValueError(f"foreign result: fidelity {result.fidelity} matches no rung")


@dataclass
class _Individual:
    result: object  # ok-status EvaluationResult
    arrival: int
    rank: int = 0
    crowding: float = 0.0


class EvolutionSearch:
    """Steady-state asynchronous multi-objective evolution with NSGA-II
    ranking. Dispatch seeds the population with random samples until it is
    full, then breeds offspring from tournament-selected parents; receive
    inserts one survivor and evicts the worst by (rank, crowding, age)."""

    def __init__(self, space: SearchSpace, max_population_size: int = 50,
                 p_crossover: float = 0.5):
        if max_population_size < 1:
            raise ValueError("population size must be >= 1")
        if not 0.0 <= p_crossover <= 1.0:
            raise ValueError("crossover probability must be in [0, 1]")
        self.space = space
        self.mu = int(max_population_size)
        self.p_crossover = float(p_crossover)
        self.population: list[_Individual] = []
        self._arrivals = 0

    def _rerank(self) -> None:
        points = [ind.result.objectives for ind in self.population]
        fronts = pareto.non_dominated_sort(points)
        for rank, front in enumerate(fronts):
            dists = pareto.crowding_distance([points[i] for i in front])
            for i, d in zip(front, dists):
                self.population[i].rank = rank
                self.population[i].crowding = d

    def _select(self, n: int, rng) -> list[_Individual]:
        ranked = [(ind.rank, ind.crowding) for ind in self.population]
        return [self.population[i] for i in pareto.binary_tournament(ranked, n, rng)]

    def _decode(self, ind: _Individual) -> Pipeline:
        return canonical_decode(ind.result.pipeline, self.space)

    def _mutate_from(self, ind: _Individual, rng) -> CandidateRequest:
        try:
            child, origin = mutate(self._decode(ind), self.space, rng,
                                   parent_id=ind.result.eval_id)
        except SpaceError:  # frozen pipeline in a degenerate space
            return CandidateRequest(sample_pipeline(self.space, rng), 1.0,
                                    OriginTag("random"))
        return CandidateRequest(child, 1.0, origin)

    def dispatch(self, rng) -> CandidateRequest:
        if len(self.population) < self.mu:
            return CandidateRequest(sample_pipeline(self.space, rng), 1.0,
                                    OriginTag("random"))
        if rng.random() < self.p_crossover:
            a, b = self._select(2, rng)
            if a is not b:
                try:
                    child, origin = crossover(
                        self._decode(a), self._decode(b), self.space, rng,
                        parent_ids=(a.result.eval_id, b.result.eval_id))
                    return CandidateRequest(child, 1.0, origin)
                except SpaceError:
                    pass  # degenerate crossover: fall through to mutation of a
            return self._mutate_from(a, rng)
        parent, = self._select(1, rng)
        return self._mutate_from(parent, rng)

    def receive(self, result) -> None:
        if result.status != "ok":
            return  # logged by the orchestrator, never joins the population
        self.population.append(_Individual(result, self._arrivals))
        self._arrivals += 1
        self._rerank()
        if len(self.population) > self.mu:
            worst = max(range(len(self.population)),
                        key=lambda i: (self.population[i].rank,
                                       -self.population[i].crowding,
                                       -self.population[i].arrival))
            del self.population[worst]
            self._rerank()


STRATEGIES = {
    "random": RandomSearch,
    "asha": AshaSearch,
    "evolution": EvolutionSearch,
}


def create_strategy(name: str, space: SearchSpace, params: dict | None = None):
    cls = STRATEGIES.get(name)
    if cls is None:
        raise ValueError(f"unknown search strategy {name!r}; "
                         f"registered: {', '.join(sorted(STRATEGIES))}")
    return cls(space, **(params or {}))
