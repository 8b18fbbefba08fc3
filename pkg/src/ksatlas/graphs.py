"""Undirected simple graphs and the graph invariants the toolkit needs.

The same Graph type plays two roles: compatibility graphs of measurement
scenarios (cliques = contexts, multipartite structure = party structure)
and exclusivity graphs of witnesses (independence number bounds the
classical value, the Lovasz number the quantum one).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import ConvergenceFailure, NotInEventForm, SizeLimitExceeded

__all__ = [
    "Graph",
    "Partition",
    "GraphInvariants",
    "maximal_cliques",
    "find_n_partition",
    "enumerate_n_partitions",
    "is_complete_n_partite",
    "independence_number",
    "lovasz_theta",
    "contextuality_ratio",
    "exclusivity_graph",
    "cycle_graph",
    "complete_graph",
    "complete_multipartite_graph",
]

DEFAULT_SIZE_LIMIT = 64


def _canon_edges(n, edges):
    out = set()
    for i, j in edges:
        if not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"edge ({i},{j}) out of range for n={n}")
        if i == j:
            raise ValueError(f"self-loop at vertex {i}")
        out.add((min(i, j), max(i, j)))
    return tuple(sorted(out))


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph on vertices 0..n-1."""

    n: int
    edges: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "edges", _canon_edges(self.n, self.edges))

    def adjacency_masks(self):
        """Neighborhoods as python-int bitsets."""
        masks = [0] * self.n
        for i, j in self.edges:
            masks[i] |= 1 << j
            masks[j] |= 1 << i
        return masks

    def has_edge(self, i, j):
        return (min(i, j), max(i, j)) in set(self.edges)

    def degree_sequence(self):
        deg = [0] * self.n
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def complement(self):
        comp = [(i, j) for i in range(self.n) for j in range(i + 1, self.n)
                if (i, j) not in set(self.edges)]
        return Graph(self.n, tuple(comp))

    def to_json(self):
        return {"n": self.n, "edges": [list(e) for e in self.edges]}

    @classmethod
    def from_json(cls, data):
        if isinstance(data, str):
            data = json.loads(data)
        return cls(int(data["n"]), tuple((int(i), int(j)) for i, j in data["edges"]))


@dataclass(frozen=True)
class Partition:
    """Disjoint independent vertex sets covering a graph."""

    parts: tuple

    def __post_init__(self):
        canon = tuple(sorted((tuple(sorted(p)) for p in self.parts), key=lambda p: p[0]))
        object.__setattr__(self, "parts", canon)

    @property
    def n_parts(self):
        return len(self.parts)

    def undersized_parts(self):
        """Indices of parts with fewer than two vertices."""
        return [k for k, p in enumerate(self.parts) if len(p) < 2]

    def part_of(self, v):
        for k, p in enumerate(self.parts):
            if v in p:
                return k
        raise KeyError(v)

    def to_json(self):
        return {"parts": [list(p) for p in self.parts]}

    @classmethod
    def from_json(cls, data):
        if isinstance(data, str):
            data = json.loads(data)
        return cls(tuple(tuple(int(v) for v in p) for p in data["parts"]))


@dataclass(frozen=True)
class GraphInvariants:
    alpha: int
    theta_lower: float
    theta_upper: float
    ratio_lower: float = field(init=False)
    ratio_upper: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "ratio_lower", self.theta_lower / self.alpha)
        object.__setattr__(self, "ratio_upper", self.theta_upper / self.alpha)

    def to_json(self):
        return {
            "alpha": self.alpha,
            "theta": [self.theta_lower, self.theta_upper],
            "ratio": [self.ratio_lower, self.ratio_upper],
        }


# -- constructors -------------------------------------------------------------

def cycle_graph(n):
    return Graph(n, tuple((i, (i + 1) % n) for i in range(n)))


def complete_graph(n):
    return Graph(n, tuple((i, j) for i in range(n) for j in range(i + 1, n)))


def complete_multipartite_graph(part_sizes):
    parts, v = [], 0
    for s in part_sizes:
        parts.append(list(range(v, v + s)))
        v += s
    edges = []
    for a in range(len(parts)):
        for b in range(a + 1, len(parts)):
            edges.extend((i, j) for i in parts[a] for j in parts[b])
    return Graph(v, tuple(edges))


# -- maximal cliques ----------------------------------------------------------

def maximal_cliques(graph):
    """All maximal cliques, each sorted, the list in lexicographic order.

    Bron-Kerbosch with pivoting on bitset neighborhoods; isolated vertices
    yield singleton cliques.
    """
    n = graph.n
    adj = graph.adjacency_masks()
    out = []

    def bits(mask):
        while mask:
            lsb = mask & -mask
            yield lsb.bit_length() - 1
            mask ^= lsb

    def expand(r, p, x):
        if p == 0 and x == 0:
            out.append(tuple(sorted(r)))
            return
        pivot_pool = p | x
        pivot = max(bits(pivot_pool), key=lambda v: (adj[v] & p).bit_count())
        for v in bits(p & ~adj[pivot]):
            expand(r + [v], p & adj[v], x & adj[v])
            p &= ~(1 << v)
            x |= 1 << v

    if n:
        expand([], (1 << n) - 1, 0)
    return sorted(out)


# -- n-partitions -------------------------------------------------------------

def enumerate_n_partitions(graph, n):
    """All partitions into exactly n nonempty independent parts.

    Proper colorings are enumerated with canonical color introduction
    (vertex 0 gets color 0, a new color only when all earlier ones have
    appeared), so each partition is produced once, in lexicographic order
    of the color vector.
    """
    nv = graph.n
    if not (1 <= n <= nv):
        return
    adj = graph.adjacency_masks()
    colors = [-1] * nv

    def backtrack(v, used):
        if v == nv:
            if used == n:
                parts = [[] for _ in range(n)]
                for u, c in enumerate(colors):
                    parts[c].append(u)
                yield Partition(tuple(tuple(p) for p in parts))
            return
        # cannot introduce enough new colors with the vertices left
        if used + (nv - v) < n:
            return
        limit = min(used + 1, n)
        for c in range(limit):
            ok = all(not (adj[v] >> u) & 1 or colors[u] != c for u in range(v))
            if ok:
                colors[v] = c
                yield from backtrack(v + 1, max(used, c + 1))
                colors[v] = -1

    yield from backtrack(0, 0)


def find_n_partition(graph, n):
    """First partition of the vertices into n independent parts, or None."""
    for part in enumerate_n_partitions(graph, n):
        return part
    return None


def is_complete_n_partite(graph):
    """The unique multipartite structure if the graph is complete n-partite.

    Non-adjacency must be an equivalence relation; the parts are then its
    classes and every cross-part edge must be present.
    """
    n = graph.n
    if n == 0:
        return None
    adj = graph.adjacency_masks()
    full = (1 << n) - 1
    non_adj = [(~adj[v]) & full for v in range(n)]  # includes v itself
    seen = 0
    parts = []
    for v in range(n):
        if (seen >> v) & 1:
            continue
        cls = non_adj[v]
        # every member must share exactly this non-adjacency class
        members = []
        m = cls
        while m:
            lsb = m & -m
            u = lsb.bit_length() - 1
            m ^= lsb
            if non_adj[u] != cls:
                return None
            members.append(u)
        parts.append(tuple(members))
        seen |= cls
    for a in range(len(parts)):
        for b in range(a + 1, len(parts)):
            for i in parts[a]:
                for j in parts[b]:
                    if not (adj[i] >> j) & 1:
                        return None
    return Partition(tuple(parts))


# -- independence number ------------------------------------------------------

def independence_number(graph, size_limit=DEFAULT_SIZE_LIMIT):
    """Exact alpha(G) = clique number of the complement.

    Branch and bound in the Tomita style: candidates are greedily colored
    (a clique cover of G restricted to the candidates) and the color count
    prunes the search. Vertices are ordered by descending degree for
    determinism and pruning strength.
    """
    if graph.n > size_limit:
        raise SizeLimitExceeded(f"graph has {graph.n} > {size_limit} vertices")
    if graph.n == 0:
        return 0
    comp = graph.complement()
    deg = comp.degree_sequence()
    order = sorted(range(comp.n), key=lambda v: (-deg[v], v))
    relabel = {v: k for k, v in enumerate(order)}
    adj = [0] * comp.n
    for i, j in comp.edges:
        a, b = relabel[i], relabel[j]
        adj[a] |= 1 << b
        adj[b] |= 1 << a

    best = 0

    def bits(mask):
        while mask:
            lsb = mask & -mask
            yield lsb.bit_length() - 1
            mask ^= lsb

    def color_sort(cand_mask):
        """Greedy coloring of candidates; returns vertices with their color
        numbers in color order (ascending bound)."""
        colored = []
        uncolored = cand_mask
        color = 0
        while uncolored:
            color += 1
            avail = uncolored
            while avail:
                v = next(iter(bits(avail)))
                colored.append((v, color))
                avail &= ~adj[v]
                avail &= ~(1 << v)
                uncolored &= ~(1 << v)
        return colored

    def expand(size, cand_mask):
        nonlocal best
        colored = color_sort(cand_mask)
        for v, c in reversed(colored):
            if size + c <= best:
                return
            nxt = cand_mask & adj[v]
            if size + 1 > best:
                best = size + 1
            if nxt:
                expand(size + 1, nxt)
            cand_mask &= ~(1 << v)

    expand(0, (1 << comp.n) - 1)
    return best


# -- Lovasz theta -------------------------------------------------------------

def _eig_margin(a, vals, vecs):
    """Frobenius norm of the eigendecomposition residual, a safe bound on
    how far any quoted eigenvalue may sit from the true spectrum."""
    r = a @ vecs - vecs * vals
    return float(np.linalg.norm(r))


def _certified_lower(x, n):
    """Exactly feasible primal value from an affine-feasible iterate.

    x has zero edge entries and unit trace; the smallest eigenvalue is
    shifted out with a diagonal correction (which keeps both affine
    constraints after renormalization)."""
    return _certified_lower_from_point(x, n)


def _dual_matrix(j, lam_edges, edges):
    m = j.copy()
    for k, (a, b) in enumerate(edges):
        m[a, b] += lam_edges[k]
        m[b, a] += lam_edges[k]
    return m


def _certified_upper(m):
    """lambda_max(J + Lambda) for an edge-supported Lambda is an upper
    bound on theta for any choice of multipliers."""
    vals, vecs = np.linalg.eigh(m)
    return float(vals[-1]) + _eig_margin(m, vals, vecs)


def _dual_face_lower(dual_matrix, edges, n, max_rank=24):
    """Certified primal value from the top eigen-cluster of J + Lambda.

    Near optimality the primal optimum is supported on the top eigenspace
    of the certified dual matrix, so the affine constraints (edges, unit
    trace) are solved by least squares inside that face for increasing
    cluster sizes; a candidate only counts if it reproduces the
    constraints to 1e-10, after which the usual diagonal-shift
    certification applies. Returns None when no face is accurate enough.
    """
    vals, vecs = np.linalg.eigh(dual_matrix)
    t = vals[-1]
    ei = np.array([e[0] for e in edges], dtype=np.intp)
    ej = np.array([e[1] for e in edges], dtype=np.intp)
    best = None
    for r in range(1, min(n, max_rank) + 1):
        if vals[n - r] < t - 1e-3 * max(1.0, abs(t)):
            break
        v = vecs[:, n - r:]
        pairs = [(p, q) for p in range(r) for q in range(p, r)]
        a = np.zeros((len(edges) + 1, len(pairs)))
        for k, (p, q) in enumerate(pairs):
            col = v[ei, p] * v[ej, q]
            if p != q:
                col = col + v[ei, q] * v[ej, p]
            a[:-1, k] = col
            a[-1, k] = 1.0 if p == q else 0.0
        b = np.zeros(len(edges) + 1)
        b[-1] = 1.0
        sol, *_ = np.linalg.lstsq(a, b, rcond=None)
        m = np.zeros((r, r))
        for k, (p, q) in enumerate(pairs):
            m[p, q] += sol[k]
            if p != q:
                m[q, p] += sol[k]
        x_ref = v @ m @ v.T
        viol = abs(np.trace(x_ref) - 1.0)
        if len(edges):
            viol = max(viol, float(np.abs(x_ref[ei, ej]).max()))
        if viol > 1e-10:
            continue
        val = _certified_lower_from_point(x_ref, n)
        if best is None or val > best:
            best = val
    return best


def _certified_lower_from_point(x_ref, n):
    vals, vecs = np.linalg.eigh(x_ref)
    delta = max(0.0, -float(vals[0]) + _eig_margin(x_ref, vals, vecs))
    return float((x_ref.sum() + delta * n) / (1.0 + delta * n))


def _recover_multipliers(x_feas, edges, n):
    """Least-squares dual recovery from complementary slackness.

    Solves (t I - J - Lambda) X ~ 0 for scalar t and edge-supported
    Lambda, the relation the optimal dual slack satisfies on the optimal
    primal X. Only Lambda is returned; the bound is recomputed from it.
    """
    ne = len(edges)
    a = np.zeros((n * n, 1 + ne))
    a[:, 0] = x_feas.flatten()
    for k, (u, v) in enumerate(edges):
        e = np.zeros((n, n))
        e[u, v] = 1.0
        e[v, u] = 1.0
        a[:, 1 + k] = (e @ x_feas).flatten()
    b = (np.ones((n, n)) @ x_feas).flatten()
    sol, *_ = np.linalg.lstsq(a, b, rcond=None)
    return -sol[1:]


def lovasz_theta(graph, tol=1e-6, size_limit=DEFAULT_SIZE_LIMIT, max_iters=200_000):
    """Certified interval [lower, upper] for the Lovasz number.

    The primal SDP  max <J,X>  s.t.  Tr X = 1, X_ij = 0 on edges, X psd
    and its dual  min lambda_max(J + Lambda)  over edge-supported Lambda
    are both solved by ADMM splitting (affine projection / psd
    projection). The reported lower bound comes from an exactly feasible
    primal point; the upper bound is lambda_max(J + Lambda) recomputed
    from the better of the dual iterate and a least-squares multiplier
    recovery, so it is valid no matter how far the iteration got. Raises
    ConvergenceFailure if the interval cannot be closed to tol within the
    iteration cap.
    """
    if graph.n > size_limit:
        raise SizeLimitExceeded(f"graph has {graph.n} > {size_limit} vertices")
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = graph.n
    if n == 0:
        return (0.0, 0.0)
    edges = list(graph.edges)
    j = np.ones((n, n))

    ei = np.array([e[0] for e in edges], dtype=np.intp)
    ej = np.array([e[1] for e in edges], dtype=np.intp)
    edge_mask = np.zeros((n, n), dtype=bool)
    if edges:
        edge_mask[ei, ej] = True
        edge_mask[ej, ei] = True
    nonedge_mask = ~edge_mask & ~np.eye(n, dtype=bool)

    def proj_affine(m):
        m = 0.5 * (m + m.T)
        if len(edges):
            m[ei, ej] = 0.0
            m[ej, ei] = 0.0
        m[np.diag_indices(n)] += (1.0 - np.trace(m)) / n
        return m

    def proj_psd(m):
        vals, vecs = np.linalg.eigh(0.5 * (m + m.T))
        pos = np.clip(vals, 0.0, None)
        return (vecs * pos) @ vecs.T

    def dual_step(v, rho):
        """Project v onto the dual affine set {t I - J - Lambda}, pulling
        the common diagonal value down by the objective gradient."""
        v = 0.5 * (v + v.T)
        s = v.copy()
        s[nonedge_mask] = -1.0
        d = float(np.trace(v)) / n - 1.0 / (rho * n)
        s[np.diag_indices(n)] = d
        return s

    x = np.eye(n) / n
    z = x.copy()
    u = np.zeros((n, n))
    rho_p = float(n)

    sd = float(n) * np.eye(n) - j          # t = n is always dual feasible
    zd = sd.copy()
    ud = np.zeros((n, n))
    rho_d = 1.0

    best = (0.0, float(n))
    alpha_cert = None
    check_every = 50
    for it in range(1, max_iters + 1):
        x = proj_affine(z - u + j / rho_p)
        z_old = z
        z = proj_psd(x + u)
        u = u + x - z

        sd = dual_step(zd - ud, rho_d)
        zd_old = zd
        zd = proj_psd(sd + ud)
        ud = ud + sd - zd

        if it % check_every:
            continue

        r = float(np.linalg.norm(x - z))
        s = float(rho_p * np.linalg.norm(z - z_old))
        if r > 10.0 * s and rho_p < 1e6:
            rho_p *= 2.0
            u /= 2.0
        elif s > 10.0 * r and rho_p > 1e-6:
            rho_p /= 2.0
            u *= 2.0
        rd = float(np.linalg.norm(sd - zd))
        sdn = float(rho_d * np.linalg.norm(zd - zd_old))
        if rd > 10.0 * sdn and rho_d < 1e6:
            rho_d *= 2.0
            ud /= 2.0
        elif sdn > 10.0 * rd and rho_d > 1e-6:
            rho_d /= 2.0
            ud *= 2.0

        lower = _certified_lower(x, n)
        lam_dual = -1.0 - sd[ei, ej] if edges else np.zeros(0)
        dual_mat = _dual_matrix(j, lam_dual, edges)
        upper = _certified_upper(dual_mat)
        if edges:
            lam_ls = _recover_multipliers(proj_psd(x), edges, n)
            ls_mat = _dual_matrix(j, lam_ls, edges)
            ls_upper = _certified_upper(ls_mat)
            if ls_upper < upper:
                upper, dual_mat = ls_upper, ls_mat
        if lower > best[0]:
            best = (lower, best[1])
        if upper < best[1]:
            best = (best[0], upper)
        if best[1] - best[0] > tol:
            polished = _dual_face_lower(dual_mat, edges, n)
            if polished is not None and polished > best[0]:
                best = (polished, best[1])
        if best[1] - best[0] > tol and it >= 2000 and alpha_cert is None and n <= 64:
            # an independent set is a feasible primal point, and it is the
            # whole optimum for the degenerate theta = alpha instances
            # that stall first-order convergence
            alpha_cert = float(independence_number(graph, size_limit=max(n, size_limit)))
        if alpha_cert is not None and alpha_cert > best[0]:
            best = (alpha_cert, best[1])
        if best[1] - best[0] <= tol:
            return best

    raise ConvergenceFailure(
        f"theta interval {best} wider than tol={tol} after {max_iters} iterations")


def contextuality_ratio(graph, tol=1e-6, size_limit=DEFAULT_SIZE_LIMIT):
    """alpha, certified theta interval and their ratio, bundled.

    An independent set of size alpha gives a feasible primal point, so
    alpha is itself a certified lower bound and the interval is tightened
    with it.
    """
    alpha = independence_number(graph, size_limit=size_limit)
    lo, hi = lovasz_theta(graph, tol=tol, size_limit=size_limit)
    lo = max(lo, float(alpha))
    return GraphInvariants(alpha=alpha, theta_lower=lo, theta_upper=hi)


# -- exclusivity graphs -------------------------------------------------------

def event_form(inequality, scenario):
    """Rewrite an inequality as nonnegative weights on event probabilities.

    Terms are grouped by the referenced sub-context; each group is
    completed to the full outcome grid of that sub-context and shifted by
    its minimum (the grid sums to one, so the shift only moves the bound).
    Returns (events, weights, bound) with events as (context, assignment)
    pairs carrying strictly positive weights.
    """
    from .scenario import outcome_grid  # local import to avoid a cycle

    groups = {}
    for ctx, assignment, coef in inequality.terms:
        groups.setdefault(ctx, {})
        groups[ctx][assignment] = groups[ctx].get(assignment, Fraction(0)) + coef
    events, weights = [], []
    bound = inequality.bound
    for ctx in sorted(groups):
        grid = outcome_grid(scenario, ctx)
        dense = {asg: groups[ctx].get(asg, Fraction(0)) for asg in grid}
        low = min(dense.values())
        if low < 0:
            bound = bound - low
            dense = {a: c - low for a, c in dense.items()}
        for asg in grid:
            c = dense[asg]
            if c < 0:
                raise NotInEventForm("negative coefficient survived conversion")
            if c > 0:
                events.append((ctx, asg))
                weights.append(c)
    return events, weights, bound


def exclusivity_graph(inequality, scenario):
    """Graph of mutual exclusivity between the witness events.

    One vertex per event (in canonical order); an edge whenever two events
    assign different outcomes to a shared measurement.
    """
    events, _, _ = event_form(inequality, scenario)
    n = len(events)
    edges = []
    for a in range(n):
        ctx_a, asg_a = events[a]
        map_a = dict(zip(ctx_a, asg_a))
        for b in range(a + 1, n):
            ctx_b, asg_b = events[b]
            if any(m in map_a and map_a[m] != o for m, o in zip(ctx_b, asg_b)):
                edges.append((a, b))
    return Graph(n, tuple(edges))
