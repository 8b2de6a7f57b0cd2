"""
Sub-dimensional representation from pairwise interaction data.

A :class:`Decomposition` approximates f by

    f(x) ~ sum_i h_i(x_{S_i}) - sum_j U_j p_j(x_{T_j}) - V f0

where h_i and p_j are restrictions of f to cuts through the cut center c.
Dimension indices are 0-based throughout.
"""

import logging
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import ConfigError, MissingSubproblemError

logger = logging.getLogger(__name__)

MAX_CLIQUES = 64
MAX_CLIQUE_VERTICES = 32


def _pair(i, j):
    i, j = int(i), int(j)
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class InteractionGraph:
    """Edges join dimensions whose pairwise non-interaction check failed."""

    n: int
    edges: frozenset = frozenset()
    flat_dims: frozenset = frozenset()

    def __post_init__(self):
        edges = frozenset(_pair(i, j) for i, j in self.edges)
        flat = frozenset(int(d) for d in self.flat_dims)
        for i, j in edges:
            if i == j:
                raise ValueError(f"self-loop on dimension {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"edge {(i, j)} out of range for n={self.n}")
            if i in flat or j in flat:
                raise ValueError(f"edge {(i, j)} touches a flat dimension")
        if any(not 0 <= d < self.n for d in flat):
            raise ValueError("flat dimension out of range")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "flat_dims", flat)

    def neighbours(self):
        adj = {d: set() for d in range(self.n)}
        for i, j in self.edges:
            adj[i].add(j)
            adj[j].add(i)
        return adj


def build_interaction_graph(pair_outcomes, flat_dims, n):
    """
    ``pair_outcomes`` maps ``(i, j)`` to a criterion outcome for every pair
    of non-flat dimensions; an unsatisfied outcome becomes an edge.
    """
    flat = {int(d) for d in flat_dims}
    outcomes = {_pair(*k): v for k, v in pair_outcomes.items()}
    active = [d for d in range(n) if d not in flat]
    edges = set()
    for pair in combinations(active, 2):
        if pair not in outcomes:
            raise KeyError(f"missing pairwise outcome for dimensions {pair}")
        if not outcomes[pair].satisfied:
            edges.add(pair)
    return InteractionGraph(n, frozenset(edges), frozenset(flat))


def _maximal_cliques(adj, vertices, limit):
    """Bron-Kerbosch with pivoting; returns None once more than ``limit`` cliques are found."""
    out = []

    def expand(r, p, x):
        if not p and not x:
            out.append(tuple(sorted(r)))
            return len(out) <= limit
        pivot = max(p | x, key=lambda u: (len(adj[u] & p), -u))
        for v in sorted(p - adj[pivot]):
            if not expand(r | {v}, p & adj[v], x & adj[v]):
                return False
            p = p - {v}
            x = x | {v}
        return True

    if not expand(set(), set(vertices), set()):
        return None
    return out


def _components(adj, vertices):
    seen = set()
    comps = []
    for v in sorted(vertices):
        if v in seen:
            continue
        stack, comp = [v], set()
        while stack:
            u = stack.pop()
            if u in comp:
                continue
            comp.add(u)
            stack.extend(adj[u] - comp)
        seen |= comp
        comps.append(tuple(sorted(comp)))
    return comps


def derive_groups(g, max_cliques=MAX_CLIQUES, max_vertices=MAX_CLIQUE_VERTICES):
    """
    Interaction groups: maximal cliques of the edge set, or connected
    components if clique enumeration exceeds the budget.  Flat singletons
    come first, followed by the remaining groups in tuple order.
    """
    adj = g.neighbours()
    coupled = sorted({d for e in g.edges for d in e})
    groups = None
    if not coupled:
        groups = []
    elif len(coupled) <= max_vertices:
        groups = _maximal_cliques({v: adj[v] for v in coupled}, coupled, max_cliques)
        if groups is None:
            logger.info("more than %d cliques; using connected components", max_cliques)
    else:
        logger.info("%d coupled dimensions exceed the clique budget; using connected components",
                    len(coupled))
    if groups is None:
        groups = _components(adj, coupled)
    covered = set(coupled)
    flat = [(d,) for d in sorted(g.flat_dims)]
    rest = groups + [(d,) for d in range(g.n) if d not in covered and d not in g.flat_dims]
    return flat + sorted(rest)


@dataclass
class Decomposition:
    S: list
    T: list = field(default_factory=list)
    U: list = field(default_factory=list)
    V: int = 0
    f0: float = 0.0
    cut_center: np.ndarray = None

    def __post_init__(self):
        self.S = [tuple(int(d) for d in s) for s in self.S]
        self.T = [tuple(int(d) for d in t) for t in self.T]
        self.U = [int(u) for u in self.U]
        self.V = int(self.V)
        self.f0 = float(self.f0)
        self.cut_center = np.asarray(self.cut_center, dtype=float)
        if len(self.T) != len(self.U):
            raise ValueError("T and U must have equal length")
        if self.V != len(self.S) - sum(self.U) - 1:
            raise ValueError(f"V={self.V} inconsistent with N_S={len(self.S)} and sum(U)={sum(self.U)}")

    @property
    def n(self):
        return len(self.cut_center)

    def subproblems(self):
        """Every index set needing a surrogate: S first, then T, without repeats."""
        return list(dict.fromkeys(self.S + self.T))

    def to_dict(self):
        return {
            "S": [list(s) for s in self.S],
            "T": [list(t) for t in self.T],
            "U": list(self.U),
            "V": self.V,
            "cut_center": self.cut_center.tolist(),
            "f0": self.f0,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(data["S"], data["T"], data["U"], data["V"], data["f0"], data["cut_center"])


def _intersection_closure(S):
    sets = {frozenset(s) for s in S}
    closure = set()
    frontier = {a & b for a, b in combinations(sorted(sets, key=sorted), 2)} - {frozenset()}
    while frontier:
        closure |= frontier
        pool = sets | closure
        frontier = {a & b for a in frontier for b in pool} - {frozenset()} - closure
    return closure


def assemble_decomposition(groups, f0, cut_center):
    """
    S/T/U/V representation of ``groups``.

    T is every distinct non-empty intersection of members of S (closed under
    further intersection).  U_j is chosen so that each cut component inside
    some S_i is counted exactly once: U_j equals the number of members of S
    containing T_j, minus one, minus the U of every larger T containing T_j.
    Entries with U_j = 0 are dropped.
    """
    cut_center = np.asarray(cut_center, dtype=float)
    n = len(cut_center)
    S = list(dict.fromkeys(tuple(sorted(int(d) for d in s)) for s in groups))
    if any(len(s) == 0 for s in S):
        raise ConfigError("empty group in decomposition")
    covered = {d for s in S for d in s}
    if covered != set(range(n)):
        missing = sorted(set(range(n)) - covered)
        extra = sorted(covered - set(range(n)))
        raise ConfigError(f"groups do not cover the {n} dimensions (missing {missing}, extra {extra})")

    closure = sorted(_intersection_closure(S), key=lambda t: (-len(t), sorted(t)))
    mult = {}
    for t in closure:
        in_s = sum(1 for s in S if t <= set(s))
        above = sum(u for t2, u in mult.items() if t < t2)
        mult[t] = in_s - 1 - above
    T = sorted((tuple(sorted(t)) for t, u in mult.items() if u != 0), key=lambda t: (len(t), t))
    U = [mult[frozenset(t)] for t in T]
    V = len(S) - sum(U) - 1
    return Decomposition(S, T, U, V, f0, cut_center)


def combined_eval(d, evaluators, query):
    """
    Recombine subproblem evaluators at ``query`` (one point or ``(Q, n)``).

    ``evaluators`` maps a sorted index tuple to a callable taking local
    points of shape ``(Q, len(tuple))``.
    """
    query = np.asarray(query, dtype=float)
    single = query.ndim == 1
    q = np.atleast_2d(query)
    if q.shape[1] != d.n:
        raise ValueError(f"query dimension {q.shape[1]} != {d.n}")

    def call(key):
        try:
            fn = evaluators[key]
        except KeyError:
            raise MissingSubproblemError(key) from None
        return np.asarray(fn(q[:, list(key)]), dtype=float)

    total = np.zeros(q.shape[0])
    for s in d.S:
        total += call(s)
    for t, u in zip(d.T, d.U):
        total -= u * call(t)
    total -= d.V * d.f0
    return float(total[0]) if single else total


def cut_evaluators(model, d):
    """Exact restrictions of ``model`` to the cuts through the cut center (testing oracle)."""

    def make(key):
        cols = list(key)

        def fn(local):
            local = np.atleast_2d(local)
            full = np.tile(d.cut_center, (local.shape[0], 1))
            full[:, cols] = local
            return np.array([model(x) for x in full])

        return fn

    return {key: make(key) for key in d.subproblems()}


__all__ = [
    "InteractionGraph",
    "Decomposition",
    "build_interaction_graph",
    "derive_groups",
    "assemble_decomposition",
    "combined_eval",
    "cut_evaluators",
]
