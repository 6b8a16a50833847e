"""Exact macro selection over the occurrence graph.

Every occurrence of every candidate body is a vertex weighted by
len(body)-1 (the bytes saved by replacing it); two vertices conflict when
their byte intervals intersect.  For a fixed set of bodies the best
replacement schedule is a maximum-weight independent set, which on
intervals is solvable exactly by dynamic programming.  The exact selector
enumerates body combinations and takes the best schedule of each.
"""

from __future__ import annotations

import itertools
import os
from bisect import bisect_left
from dataclasses import dataclass
from typing import Sequence

from .greedy import (
    MACRO_CODE_HI,
    MACRO_CODE_LO,
    MAX_MACROS,
    CompactionResult,
    Macro,
    count_occurrences,
)

DEFAULT_BUDGET = 10 ** 8
BUDGET_ENV = "MACROFORGE_BUDGET"
_SATURATED = 10 ** 18


class BudgetError(Exception):
    """Raised when exact selection would exceed the step budget."""

    def __init__(self, estimate: "CostEstimate"):
        self.estimate = estimate
        super().__init__(
            f"estimated {estimate.steps} steps exceeds budget {estimate.budget}"
            f" (set {BUDGET_ENV} to raise it)")


@dataclass(frozen=True)
class Occurrence:
    content: bytes | tuple
    start: int
    end: int  # inclusive
    weight: int


@dataclass(frozen=True)
class CostEstimate:
    approved: bool
    steps: int
    budget: int


def enumerate_occurrences(data: Sequence[int], max_len: int) -> list[Occurrence]:
    """All occurrences (overlapping included) of every subsequence of
    length 2..max_len, as weighted closed intervals."""
    if max_len < 2:
        raise ValueError("max_len must be at least 2")
    data = bytes(data)
    occs = []
    n = len(data)
    for k in range(2, max_len + 1):
        for i in range(n - k + 1):
            occs.append(Occurrence(data[i:i + k], i, i + k - 1, k - 1))
    return occs


def mwis(occurrences: Sequence[Occurrence]) -> tuple[list[Occurrence], int]:
    """Maximum-weight independent set of interval vertices.

    Classic weighted interval scheduling: sort by right endpoint, binary
    search the rightmost compatible predecessor, then
    best[j+1] = max(best[j], w_j + best[p_j]).  Returns the chosen
    occurrences sorted by start and the total weight; deterministic for a
    fixed input (ties resolved toward not taking the later interval).
    """
    if not occurrences:
        return [], 0
    order = sorted(range(len(occurrences)),
                   key=lambda i: (occurrences[i].end, occurrences[i].start,
                                  occurrences[i].content, i))
    ends = [occurrences[i].end for i in order]
    n = len(order)
    best = [0] * (n + 1)
    pred = [0] * n
    take = [False] * n
    for j in range(n):
        o = occurrences[order[j]]
        p = bisect_left(ends, o.start, 0, j)  # ends[:p] < start, closed intervals
        pred[j] = p
        with_j = o.weight + best[p]
        if with_j > best[j]:
            best[j + 1] = with_j
            take[j] = True
        else:
            best[j + 1] = best[j]
    chosen = []
    j = n
    while j > 0:
        if take[j - 1]:
            chosen.append(occurrences[order[j - 1]])
            j = pred[j - 1]
        else:
            j -= 1
    chosen.sort(key=lambda o: o.start)
    return chosen, best[n]


def _saturating_mul(a: int, b: int) -> int:
    if a and b and a > _SATURATED // b:
        return _SATURATED
    return min(a * b, _SATURATED)


def _combination_count(pool: int, pick_limit: int) -> int:
    """Sum of C(pool, k) for k = 0..pick_limit, saturating."""
    total = 1
    term = 1
    for k in range(1, pick_limit + 1):
        if k > pool:
            break
        term = _saturating_mul(term, pool - k + 1) // k
        total = min(total + term, _SATURATED)
        if total >= _SATURATED:
            return _SATURATED
    return total


def estimate_cost(eta: int, max_len: int, max_macros: int,
                  budget: int | None = None) -> CostEstimate:
    """Predict the exact selector's work and compare against the budget.

    Refusal is a value, not an exception: callers decide what to do.  The
    candidate-content pool is bounded by eta*(max_len-1) and each
    combination is charged one interval-DP pass at (max_macros*eta)^2
    steps.  Arithmetic saturates instead of overflowing.
    """
    if budget is None:
        budget = int(os.environ.get(BUDGET_ENV, DEFAULT_BUDGET))
    pool = max(eta, 0) * max(max_len - 1, 0)
    combos = _combination_count(pool, max_macros)
    per_combo = _saturating_mul(max_macros * max(eta, 0), max_macros * max(eta, 0))
    steps = _saturating_mul(combos, per_combo)
    return CostEstimate(approved=steps <= budget, steps=steps, budget=budget)


def exact_over_occurrences(total_len: int, occurrences: Sequence[Occurrence],
                           max_macros: int,
                           body_cost=len) -> tuple[list, list[Occurrence], int]:
    """Optimal body combination over a prepared occurrence universe.

    Enumerates every combination of up to max_macros distinct contents,
    scores each as total_len - (best schedule weight) + (table bytes), and
    returns (sorted bodies, chosen occurrences, objective).  Ties prefer
    fewer bodies, then the lexicographically smallest sorted body list.

    Contents are opaque as long as they are hashable and sortable;
    body_cost maps one to its table size in bytes (len for plain byte
    strings, a width function for item streams whose contents are match
    keys rather than bytes).

    Contents whose solo non-overlapping occurrence count is < 2 are skipped:
    k chosen occurrences of a body save k*(len-1) bytes against len table
    bytes, so anything that cannot place two occurrences can never pay for
    itself and only inflates the enumeration.
    """
    by_content: dict = {}
    for o in occurrences:
        by_content.setdefault(o.content, []).append(o)
    universe = [c for c, occ in sorted(by_content.items())
                if _solo_capacity(occ) >= 2]
    best: tuple | None = None
    for r in range(0, max_macros + 1):
        for combo in itertools.combinations(universe, r):
            verts = [o for c in combo for o in by_content[c]]
            chosen, weight = mwis(verts)
            obj = total_len - weight + sum(body_cost(c) for c in combo)
            key = (obj, r, combo)
            if best is None or key < best[:3]:
                best = (obj, r, combo, chosen)
    assert best is not None  # r = 0 always present
    obj, _, combo, chosen = best
    chosen = [o for o in chosen if o.content in set(combo)]
    return list(combo), chosen, obj


def _solo_capacity(occs: list[Occurrence]) -> int:
    """Max non-overlapping occurrences of one content (greedy by end)."""
    count = 0
    free = -1
    for o in sorted(occs, key=lambda o: o.end):
        if o.start > free:
            count += 1
            free = o.end
    return count


def exact_select(data: Sequence[int], max_macros: int, max_len: int,
                 budget: int | None = None) -> CompactionResult:
    """Globally optimal macro set of size <= max_macros.

    Guarded by estimate_cost; raises BudgetError when refused.  The
    residual realizes the chosen schedule exactly, so the objective equals
    len(residual) + table size by construction.
    """
    if not 1 <= max_macros <= MAX_MACROS:
        raise ValueError(f"macro count must be 1..{MAX_MACROS}")
    if max_len < 2:
        raise ValueError("max_len must be at least 2")
    data = bytes(data)
    est = estimate_cost(len(data), max_len, max_macros, budget=budget)
    if not est.approved:
        raise BudgetError(est)
    bodies, chosen, obj = exact_over_occurrences(
        len(data), enumerate_occurrences(data, max_len), max_macros)
    codes: dict[bytes, int] = {}
    assigned: set[int] = set()
    for body in bodies:
        code = _clean_code(data, assigned)
        if code is None:
            raise ValueError("no opcode in 0x50..0xFF is free of the input")
        codes[body] = code
        assigned.add(code)
    starts = {o.start: o for o in chosen}
    residual = bytearray()
    i = 0
    while i < len(data):
        o = starts.get(i)
        if o is not None:
            residual.append(codes[o.content])
            i = o.end + 1
        else:
            residual.append(data[i])
            i += 1
    macros = [Macro(body=b, code=codes[b]) for b in bodies]
    result = CompactionResult(macros=macros, residual=bytes(residual), objective=obj)
    assert result.objective == len(result.residual) + result.table_size()
    return result


def _clean_code(data: bytes, assigned: set[int]) -> int | None:
    for code in range(MACRO_CODE_LO, MACRO_CODE_HI + 1):
        if code not in assigned and code not in data:
            return code
    return None


def brute_force_select(data: Sequence[int], max_macros: int,
                       max_len: int) -> tuple[list[bytes], int]:
    """Reference implementation by sheer enumeration.

    Every macro set of size <= max_macros over the distinct substrings of
    length 2..max_len, and for each set every non-overlapping occurrence
    selection via take/skip recursion (no interval DP, nothing shared with
    mwis).  Returns (sorted bodies, objective).  Hard-capped to tiny inputs
    because the recursion really does visit every selection.
    """
    data = bytes(data)
    n = len(data)
    if n > 32:
        raise ValueError("brute force capped at 32 bytes")
    if max_len > 5:
        raise ValueError("brute force capped at max_len 5")
    if max_macros > 2:
        raise ValueError("brute force capped at 2 macros")
    if max_len < 2 or max_macros < 1:
        raise ValueError("need max_len >= 2 and max_macros >= 1")
    contents = sorted({data[i:i + k]
                       for k in range(2, max_len + 1)
                       for i in range(n - k + 1)})
    best: tuple | None = (n, 0, ())
    for r in range(1, max_macros + 1):
        for combo in itertools.combinations(contents, r):
            occs = []
            for c in combo:
                for i in range(n - len(c) + 1):
                    if data[i:i + len(c)] == c:
                        occs.append((i, i + len(c) - 1, len(c) - 1))
            occs.sort()
            weight = _best_selection(occs, 0, 0)
            obj = n - weight + sum(len(c) for c in combo)
            key = (obj, r, combo)
            if key < best:
                best = key
    obj, _, combo = best
    return list(combo), obj


def _best_selection(occs: list[tuple[int, int, int]], i: int, free_from: int) -> int:
    # occs sorted by start; free_from = 1 + end of the last taken interval,
    # which dominates every earlier taken end.
    if i == len(occs):
        return 0
    start, end, weight = occs[i]
    value = _best_selection(occs, i + 1, free_from)
    if start >= free_from:
        value = max(value, weight + _best_selection(occs, i + 1, end + 1))
    return value
