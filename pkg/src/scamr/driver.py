"""
End-to-end adaptive surrogate construction.

:func:`run_scamr` runs four phases on the global domain:

1. first-order gPC on the level-1 sparse grid (discrete projection);
2. per-dimension centerline checks and pairwise interaction checks, giving
   a :class:`~scamr.decomposition.Decomposition`;
3. if no dimension is critical, second-order gPC on the level-2 sparse grid;
4. otherwise breadth-first element refinement of every subproblem.

All model values flow through one :class:`~scamr.cache.EvaluationCache`,
whose size is the reported cost.
"""

import itertools
import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _json, _kernels
from .adaptivity import (
    check_abrupt_variation,
    check_first_level_noninteraction,
    check_gpc_residual,
    check_pairwise_interaction,
    fit_fallback,
    rank_critical_dimensions,
)
from .cache import EvaluationCache
from .decomposition import (
    Decomposition,
    assemble_decomposition,
    build_interaction_graph,
    combined_eval,
    derive_groups,
)
from .errors import ConfigError, OutOfDomainError
from .gpc import (
    GpcSurrogate,
    fit_discrete_projection,
    residual_inf,
    total_degree_indices,
)
from .grids import Element, hypervolume_fraction, sparse_grid, subdivide

logger = logging.getLogger(__name__)

CONVERGED_P2 = "converged-p2"
CONVERGED_P1 = "converged-p1"
FALLBACK_P1 = "converged-p1-fallback"
SPLIT = "split"
LEAF_STATUSES = (CONVERGED_P2, CONVERGED_P1, FALLBACK_P1)

_QUERY_CHUNK = 100_000


@dataclass
class ScamrConfig:
    epsilon1: float = 1e-2
    epsilon2: float = 1e-2
    max_iterations: int = 10
    min_volume_fraction: float = 1e-3
    rng_seed: int = 0
    max_cliques: int = 64
    max_clique_vertices: int = 32

    def __post_init__(self):
        for name in ("epsilon1", "epsilon2"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and np.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be a positive number, got {v!r}")
        if not isinstance(self.max_iterations, (int, np.integer)) or self.max_iterations < 1:
            raise ConfigError(f"max_iterations must be a positive integer, got {self.max_iterations!r}")
        if not 0 < self.min_volume_fraction < 1:
            raise ConfigError(f"min_volume_fraction must lie in (0, 1), got {self.min_volume_fraction!r}")
        if self.max_cliques < 1 or self.max_clique_vertices < 1:
            raise ConfigError("clique budgets must be positive")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {k: data[k] for k in cls.__dataclass_fields__ if k in data}
        unknown = sorted(set(data) - set(known))
        if unknown:
            raise ConfigError(f"unknown config fields {unknown}")
        return cls(**known)


class RunLog:
    """
    Line-oriented run records ``{phase, element, criterion, error, decision,
    evaluations}``, kept in memory and optionally streamed as JSON lines.
    """

    def __init__(self, stream=None):
        self.stream = stream
        self.records = []

    def emit(self, phase, element, criterion, error, decision, evaluations):
        rec = {
            "phase": phase,
            "element": element,
            "criterion": criterion,
            "error": None if error is None else float(error),
            "decision": decision,
            "evaluations": int(evaluations),
        }
        self.records.append(rec)
        if self.stream is not None:
            self.stream.write(json.dumps(rec) + "\n")
        logger.debug("%s", rec)


@dataclass
class TreeNode:
    element: Element
    status: str = "open"
    surrogate: GpcSurrogate = None
    children: list = field(default_factory=list)


class ElementTree:
    """Refinement history of one subproblem; the leaves tile its domain."""

    def __init__(self, dims, root):
        self.dims = tuple(dims)
        self.root = root
        self.nodes = {root.id: TreeNode(root)}
        self._index = None

    def add_children(self, parent_id, children):
        node = self.nodes[parent_id]
        node.status = SPLIT
        node.children = [c.id for c in children]
        for c in children:
            self.nodes[c.id] = TreeNode(c)
        self._index = None

    def close(self, element_id, status, surrogate):
        node = self.nodes[element_id]
        node.status = status
        node.surrogate = surrogate
        self._index = None

    def leaves(self):
        return [nd for nd in self.nodes.values() if not nd.children]

    def volume_fractions(self):
        return [hypervolume_fraction(nd.element, self.root) for nd in self.leaves()]

    def _leaf_index(self):
        if self._index is None:
            leaves = self.leaves()
            lo = np.array([nd.element.lo for nd in leaves])
            hi = np.array([nd.element.hi for nd in leaves])
            closed = np.array([nd.element.closed_top for nd in leaves], dtype=bool)
            self._index = (leaves, lo, hi, closed)
        return self._index

    def locate(self, local):
        """Leaf position (into :meth:`leaves`) of each local point."""
        local = np.atleast_2d(np.asarray(local, dtype=float))
        leaves, lo, hi, closed = self._leaf_index()
        idx = _kernels.locate_boxes(local, lo, hi, closed)
        if np.any(idx < 0):
            raise OutOfDomainError(local[idx < 0][0], f"query outside subproblem {list(self.dims)}")
        return idx

    def evaluate(self, local):
        local = np.atleast_2d(np.asarray(local, dtype=float))
        out = np.empty(local.shape[0])
        leaves = self._leaf_index()[0]
        idx = self.locate(local)
        for k in np.unique(idx):
            rows = idx == k
            s = leaves[k].surrogate
            if s is None:
                raise RuntimeError(f"leaf {leaves[k].element.id} has no surrogate")
            out[rows] = s.evaluate(local[rows], check=False)
        return out

    def mean(self):
        total = 0.0
        for nd in self.leaves():
            total += hypervolume_fraction(nd.element, self.root) * nd.surrogate.mean()
        return total

    def to_dict(self):
        items = []
        for nid in sorted(self.nodes):
            nd = self.nodes[nid]
            rec = nd.element.to_dict()
            rec["status"] = nd.status
            if nd.surrogate is not None:
                rec["surrogate"] = nd.surrogate.to_dict()
            items.append(rec)
        return {"dims": list(self.dims), "elements": items}

    @classmethod
    def from_dict(cls, data):
        dims = tuple(data["dims"])
        recs = {r["id"]: r for r in data["elements"]}
        children = {}
        for r in data["elements"]:
            if r["parent"] is not None:
                children.setdefault(r["parent"], []).append(r["id"])
        root_id = next(r["id"] for r in data["elements"] if r["parent"] is None)
        root = Element(tuple(map(tuple, recs[root_id]["bounds"])), root_id)
        tree = cls(dims, root)
        tree.nodes = {}

        # closed_top is recomputed from the root's upper faces
        def build(nid, parent, depth):
            r = recs[nid]
            b = tuple(map(tuple, r["bounds"]))
            closed = tuple(hi >= rb[1] for (_, hi), rb in zip(b, root.bounds))
            e = Element(b, nid, parent, depth, closed)
            s = GpcSurrogate.from_dict(r["surrogate"]) if "surrogate" in r else None
            tree.nodes[nid] = TreeNode(e, r["status"], s, list(children.get(nid, [])))
            for c in children.get(nid, []):
                build(c, nid, depth + 1)

        build(root_id, None, 0)
        return tree


@dataclass
class ScamrSurrogate:
    decomposition: Decomposition
    trees: dict
    total_evaluations: int
    domain: Element
    config: ScamrConfig
    phase: int

    def evaluate(self, query):
        return extract_value(self, query)

    def mean(self):
        return estimate_mean(self)

    def to_dict(self):
        return {
            "config": self.config.to_dict(),
            "domain": [list(b) for b in self.domain.bounds],
            "phase": self.phase,
            "evaluations": self.total_evaluations,
            "decomposition": self.decomposition.to_dict(),
            "trees": [self.trees[k].to_dict() for k in sorted(self.trees, key=lambda k: (len(k), k))],
        }

    def to_json(self, indent=None):
        return _json.dumps(self.to_dict(), indent=indent)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json(indent=1))
            fh.write("\n")

    @classmethod
    def from_dict(cls, data):
        trees = {}
        for t in data["trees"]:
            tree = ElementTree.from_dict(t)
            trees[tree.dims] = tree
        return cls(
            Decomposition.from_dict(data["decomposition"]),
            trees,
            int(data["evaluations"]),
            Element(tuple(map(tuple, data["domain"]))),
            ScamrConfig.from_dict(data["config"]),
            int(data["phase"]),
        )

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _subdomain(domain, dims, ids):
    return Element(tuple(domain.bounds[d] for d in dims), next(ids))


def refine_subproblem(dims, evaluator, domain, config, ids=None, log=None):
    """
    Breadth-first refinement of the subproblem spanned by ``dims``.

    ``evaluator`` supplies model values in the subproblem's local
    coordinates (usually a :class:`~scamr.cache.SubspaceEvaluator`).
    Returns the :class:`ElementTree`; every leaf carries a surrogate.
    """
    ids = itertools.count(1) if ids is None else ids
    log = log or RunLog()
    root = _subdomain(domain, dims, ids)
    tree = ElementTree(dims, root)
    eps1 = config.epsilon1
    open_elems = [root]
    sweeps = 0
    while open_elems:
        if sweeps >= config.max_iterations:
            break
        next_open = []
        for e in open_elems:
            ranking = rank_critical_dimensions(e, evaluator, eps1)
            if ranking:
                split = ranking.dims[:2]
                log.emit(4, e.id, "abrupt-variation", ranking.entries[0][1], f"split {split}", evaluator.count)
            else:
                outcome, s = check_gpc_residual(e, 2, evaluator, eps1)
                if outcome.satisfied:
                    tree.close(e.id, CONVERGED_P2, s)
                    log.emit(4, e.id, "gpc-residual", outcome.error, "converged-p2", evaluator.count)
                    continue
                split = ranking.top(2)
                log.emit(4, e.id, "gpc-residual", outcome.error, f"split {split}", evaluator.count)
            children = subdivide(e, split, ids)
            tree.add_children(e.id, children)
            next_open.extend(children)
        open_elems = next_open
        sweeps += 1
        open_volume = sum(hypervolume_fraction(e, root) for e in open_elems)
        if open_elems and open_volume < config.min_volume_fraction:
            logger.info("subproblem %s: open volume %.3g < V_min after %d sweeps",
                        list(dims), open_volume, sweeps)
            break
    for e in open_elems:
        s = fit_fallback(e, evaluator)
        tree.close(e.id, FALLBACK_P1, s)
        log.emit(4, e.id, "fallback", None, FALLBACK_P1, evaluator.count)
    return tree


def _global_fit(cache, domain, level, order):
    rule = sparse_grid(domain.dim, level)
    nodes = domain.lo + 0.5 * (rule.nodes + 1.0) * domain.widths
    values = cache.evaluate(nodes)
    basis = total_degree_indices(domain.dim, order)
    coeffs = fit_discrete_projection(basis, rule.nodes, rule.weights, values)
    resid = residual_inf(basis, coeffs, rule.nodes, values)
    return GpcSurrogate(basis, coeffs, np.array(domain.bounds)), resid


def _single_element_result(cache, domain, config, surrogate, status, phase, ids):
    n = domain.dim
    center = domain.center
    f0 = float(cache.evaluate(center[None, :])[0])
    dims = tuple(range(n))
    root = Element(domain.bounds, next(ids))
    tree = ElementTree(dims, root)
    tree.close(root.id, status, surrogate)
    d = Decomposition([dims], [], [], 0, f0, center)
    return ScamrSurrogate(d, {dims: tree}, cache.count, domain, config, phase)


def run_scamr(model, domain, config=None, log=None, executor=None, cache=None):
    """
    Build a surrogate of ``model`` (a map from a 1-D coordinate array to a
    float) over the hyperbox ``domain``.
    """
    config = config or ScamrConfig()
    if not isinstance(domain, Element):
        domain = Element(domain)
    log = log or RunLog()
    n = domain.dim
    cache = cache or EvaluationCache(model, n, executor=executor)
    ids = itertools.count(1)
    eps1, eps2 = config.epsilon1, config.epsilon2

    # phase 1: global first-order fit
    s1, resid = _global_fit(cache, domain, 1, 1)
    ok = resid < eps1
    log.emit(1, 0, "gpc-residual", resid, "accept" if ok else "continue", cache.count)
    if ok:
        return _single_element_result(cache, domain, config, s1, CONVERGED_P1, 1, ids)

    # phase 2: centerline and pairwise checks
    root = Element(domain.bounds, 0)
    errors = np.empty(n)
    flat = []
    for d in range(n):
        errors[d] = check_abrupt_variation(root, d, cache, eps1).error
        flat_out = check_first_level_noninteraction(root, d, cache, eps1)
        if flat_out.satisfied:
            flat.append(d)
        log.emit(2, 0, f"abrupt-variation[{d}]", errors[d],
                 "critical" if not errors[d] < eps1 else "smooth", cache.count)
        log.emit(2, 0, f"first-level[{d}]", flat_out.error,
                 "flat" if flat_out.satisfied else "active", cache.count)
    critical = [d for d in range(n) if not errors[d] < eps1]
    active = [d for d in range(n) if d not in flat]
    outcomes = {}
    for i, j in itertools.combinations(active, 2):
        out = check_pairwise_interaction(i, j, cache, root, eps2)
        outcomes[(i, j)] = out
        log.emit(2, 0, f"pairwise[{i},{j}]", out.error,
                 "independent" if out.satisfied else "interacting", cache.count)
    graph = build_interaction_graph(outcomes, flat, n)
    groups = derive_groups(graph, config.max_cliques, config.max_clique_vertices)
    center = domain.center
    f0 = float(cache.evaluate(center[None, :])[0])
    decomp = assemble_decomposition(groups, f0, center)
    logger.info("decomposition: %d flat, %d interacting pairs, S=%s T=%s U=%s V=%d",
                len(flat), len(graph.edges), decomp.S, decomp.T, decomp.U, decomp.V)

    # phase 3: global second-order fit when nothing is critical
    if not critical:
        s2, resid = _global_fit(cache, domain, 2, 2)
        ok = resid < eps1
        log.emit(3, 0, "gpc-residual", resid, "accept" if ok else "continue", cache.count)
        if ok:
            return _single_element_result(cache, domain, config, s2, CONVERGED_P2, 3, ids)

    # phase 4: refine every subproblem on its cut through the center
    trees = {}
    for dims in decomp.subproblems():
        ev = cache.restrict(dims, center)
        trees[dims] = refine_subproblem(dims, ev, domain, config, ids, log)
        logger.info("subproblem %s: %d leaves, %d evaluations so far",
                    list(dims), len(trees[dims].leaves()), cache.count)
    return ScamrSurrogate(decomp, trees, cache.count, domain, config, 4)


def extract_value(s, query):
    """Surrogate value at one point or at each row of ``(Q, n)`` points."""
    query = np.asarray(query, dtype=float)
    single = query.ndim == 1
    q = np.atleast_2d(query)
    if q.shape[1] != s.domain.dim:
        raise ValueError(f"query dimension {q.shape[1]} != {s.domain.dim}")
    if not np.all(s.domain.contains_closed(q)):
        bad = q[~s.domain.contains_closed(q)][0]
        raise OutOfDomainError(bad, "query outside the global domain")
    q = np.clip(q, s.domain.lo, s.domain.hi)
    evaluators = {k: t.evaluate for k, t in s.trees.items()}
    out = np.empty(q.shape[0])
    for start in range(0, q.shape[0], _QUERY_CHUNK):
        sl = slice(start, start + _QUERY_CHUNK)
        out[sl] = combined_eval(s.decomposition, evaluators, q[sl])
    return float(out[0]) if single else out


def estimate_mean(s):
    """Volume-weighted leaf means, recombined through the decomposition."""
    d = s.decomposition
    total = sum(s.trees[k].mean() for k in d.S)
    total -= sum(u * s.trees[t].mean() for t, u in zip(d.T, d.U))
    return float(total - d.V * d.f0)


def evaluation_count(s):
    return int(s.total_evaluations)


__all__ = [
    "ScamrConfig",
    "ScamrSurrogate",
    "ElementTree",
    "RunLog",
    "run_scamr",
    "refine_subproblem",
    "extract_value",
    "estimate_mean",
    "evaluation_count",
    "LEAF_STATUSES",
]
