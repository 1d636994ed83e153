"""Pareto utilities: dominance, fast non-dominated sorting, crowding distance,
and binary-tournament parent selection. All objectives are maximized."""

from __future__ import annotations

__all__ = ["dominates", "non_dominated_sort", "crowding_distance", "binary_tournament"]


def dominates(a, b) -> bool:
    """True iff a >= b in every objective and a > b in at least one."""
    if len(a) != len(b):
        raise ValueError(f"objective length mismatch: {len(a)} vs {len(b)}")
    strict = False
    for x, y in zip(a, b):
        if x < y:
            return False
        if x > y:
            strict = True
    return strict


def non_dominated_sort(points) -> list[list[int]]:
    """Deb's fast non-dominated sort. Returns fronts of input indices; within
    a front, indices keep input order."""
    n = len(points)
    if n == 0:
        return []
    dominated_by = [[] for _ in range(n)]  # p -> indices p dominates
    counts = [0] * n  # how many points dominate p
    fronts = [[]]
    for p in range(n):
        for q in range(n):
            if p == q:
                continue
            if dominates(points[p], points[q]):
                dominated_by[p].append(q)
            elif dominates(points[q], points[p]):
                counts[p] += 1
        if counts[p] == 0:
            fronts[0].append(p)
    i = 0
    while fronts[i]:
        nxt = []
        for p in fronts[i]:
            for q in dominated_by[p]:
                counts[q] -= 1
                if counts[q] == 0:
                    nxt.append(q)
        fronts.append(sorted(nxt))
        i += 1
    fronts.pop()
    return fronts


def crowding_distance(front) -> list[float]:
    """NSGA-II crowding distance for one front, returned in input order.
    Boundary points per objective get +inf; zero-range objectives contribute 0."""
    n = len(front)
    if n == 0:
        return []
    dist = [0.0] * n
    n_obj = len(front[0])
    for m in range(n_obj):
        order = sorted(range(n), key=lambda i: front[i][m])
        lo = front[order[0]][m]
        hi = front[order[-1]][m]
        dist[order[0]] = float("inf")
        dist[order[-1]] = float("inf")
        if hi == lo:
            continue
        for k in range(1, n - 1):
            i = order[k]
            if dist[i] != float("inf"):
                dist[i] += (front[order[k + 1]][m] - front[order[k - 1]][m]) / (hi - lo)
    return dist


def binary_tournament(ranked, n: int, rng) -> list[int]:
    """Draw ``n`` winners by binary tournament over (rank, crowding) pairs.
    Lower rank wins; ties go to larger crowding, then a uniform coin.
    ``ranked`` is a list of (rank, crowding) per individual; returns indices."""
    if not ranked:
        raise ValueError("empty population")
    winners = []
    for _ in range(n):
        i = rng.randrange(len(ranked))
        j = rng.randrange(len(ranked))
        ri, ci = ranked[i]
        rj, cj = ranked[j]
        if ri < rj:
            winners.append(i)
        elif rj < ri:
            winners.append(j)
        elif ci > cj:
            winners.append(i)
        elif cj > ci:
            winners.append(j)
        else:
            winners.append(i if rng.random() < 0.5 else j)
    return winners
