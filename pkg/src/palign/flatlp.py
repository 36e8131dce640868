"""In-repo linear programming for the bounded-Lipschitz (flat) metric.

The metric between two nonnegative atomic measures is the optimum of
the finite program over test values phi_k at the union support

    maximize   sum_k (mu_k - nu_k) phi_k
    subject to -1 <= phi_k <= 1,  |phi_k - phi_l| <= |z_k - z_l|.

Tightness: an optimal vector on the support extends to all of R^k with
the same bounds via the McShane extension phi(z) = min_k (phi_k +
|z - z_k|), truncated to [-1, 1]; the extension preserves the Lipschitz
constant and truncation preserves feasibility and the objective, so the
finite optimum equals the metric.

Two solvers live here.

``simplex_maximize``
    A dense-tableau primal simplex.  It solves the program above
    directly (after shifting phi by +1 to get nonnegative variables)
    and is intended for small supports: the program carries O(n^2)
    pair constraints.

``solve_transport``
    A transportation (network) simplex used by the production path.
    By LP duality, the program above equals a balanced transportation
    problem: ship the positive part of (mu - nu) to the negative part
    at cost min(|z_k - z_l|, 2) per unit, with one virtual source and
    one virtual sink absorbing unmatched mass at cost 1 per unit
    (creating or destroying a unit of mass changes the objective by at
    most |phi| <= 1; routing through both virtual nodes caps the
    effective arc cost at 2).  The equality of both optima is exercised
    directly in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LPUnboundedError, SolverToleranceError


# ----------------------------------------------------------------------
# dense tableau simplex
# ----------------------------------------------------------------------

def simplex_maximize(c, A, b, tol: float = 1e-11, max_iter: int | None = None):
    """Maximize c.x subject to A x <= b, x >= 0, b >= 0.

    Starts from the all-slack basis (valid because b >= 0).  Dantzig
    pricing with a Bland fallback after a stall, so termination is
    guaranteed.  Returns (x, value).
    """
    c = np.asarray(c, dtype=np.float64)
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    m, n = A.shape
    if b.min(initial=0.0) < 0.0:
        raise ValueError("simplex_maximize requires b >= 0")
    if max_iter is None:
        max_iter = 200 * (m + n) + 2000

    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n : n + m] = np.eye(m)
    T[:m, -1] = b
    T[m, :n] = -c
    basis = list(range(n, n + m))

    stall = 0
    last_obj = 0.0
    for _ in range(max_iter):
        row = T[m, :-1]
        if stall < 50:
            j = int(np.argmin(row))
            if row[j] >= -tol:
                break
        else:  # Bland: first improving column
            cand = np.nonzero(row < -tol)[0]
            if cand.size == 0:
                break
            j = int(cand[0])
        col = T[:m, j]
        pos = col > tol
        if not pos.any():
            raise LPUnboundedError("unbounded objective in simplex")
        ratios = np.full(m, np.inf)
        ratios[pos] = T[:m, -1][pos] / col[pos]
        i = int(np.argmin(ratios))
        piv = T[i, j]
        T[i, :] /= piv
        for r in range(m + 1):
            if r != i and T[r, j] != 0.0:
                T[r, :] -= T[r, j] * T[i, :]
        basis[i] = j
        obj = T[m, -1]
        stall = stall + 1 if obj <= last_obj + tol else 0
        last_obj = obj
    else:
        raise SolverToleranceError("simplex iteration limit reached")

    x = np.zeros(n)
    for i, bi in enumerate(basis):
        if bi < n:
            x[bi] = T[i, -1]
    return x, float(T[m, -1])


def flat_lp_direct(points, signed_weights):
    """Solve the test-function program with the dense simplex.

    Small supports only (constraint count grows as n^2).  Returns the
    optimum value.
    """
    z = np.asarray(points, dtype=np.float64)
    cw = np.asarray(signed_weights, dtype=np.float64)
    keep = cw != 0.0
    z, cw = z[keep], cw[keep]
    n = len(cw)
    if n == 0:
        return 0.0
    diff = z[:, None, :] - z[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    rows = []
    rhs = []
    # psi = phi + 1 in [0, 2]; pair constraints are shift-invariant
    for k in range(n):
        for l in range(n):
            if k == l:
                continue
            r = np.zeros(n)
            r[k] = 1.0
            r[l] = -1.0
            rows.append(r)
            rhs.append(dist[k, l])
    A = np.vstack(rows + [np.eye(n)]) if rows else np.eye(n)
    b = np.concatenate([np.array(rhs), np.full(n, 2.0)])
    _, val = simplex_maximize(cw, A, b)
    return val - float(cw.sum())


# ----------------------------------------------------------------------
# transportation network simplex
# ----------------------------------------------------------------------

@dataclass
class TransportResult:
    value: float
    u: np.ndarray  # row potentials
    v: np.ndarray  # column potentials
    residual: float  # max optimality/feasibility violation


class _Tree:
    """Spanning tree of the bipartite transport graph.

    Nodes 0..m-1 are rows, m..m+n-1 are columns; arcs are basis cells.
    """

    def __init__(self, m, n, arcs):
        self.m = m
        self.n = n
        self.adj: list[dict[int, int]] = [dict() for _ in range(m + n)]
        self.arcs = []  # list of [i, j, flow]
        for a in arcs:
            self.add(a)

    def add(self, arc):
        idx = len(self.arcs)
        self.arcs.append(arc)
        i, j = arc[0], self.m + arc[1]
        self.adj[i][j] = idx
        self.adj[j][i] = idx
        return idx

    def remove(self, idx):
        # swap-remove to keep arc indices dense
        i, j = self.arcs[idx][0], self.m + self.arcs[idx][1]
        del self.adj[i][j]
        del self.adj[j][i]
        last = len(self.arcs) - 1
        if idx != last:
            moved = self.arcs[last]
            self.arcs[idx] = moved
            a, b = moved[0], self.m + moved[1]
            self.adj[a][b] = idx
            self.adj[b][a] = idx
        self.arcs.pop()

    def path(self, start, goal):
        """Node path start -> goal (BFS)."""
        prev = {start: None}
        queue = [start]
        while queue and goal not in prev:
            nxt = []
            for node in queue:
                for nb in self.adj[node]:
                    if nb not in prev:
                        prev[nb] = node
                        nxt.append(nb)
            queue = nxt
        path = [goal]
        while prev[path[-1]] is not None:
            path.append(prev[path[-1]])
        path.reverse()
        return path

    def potentials(self, cost):
        m, n = self.m, self.n
        u = np.zeros(m)
        v = np.zeros(n)
        seen = np.zeros(m + n, dtype=bool)
        seen[0] = True
        stack = [0]
        while stack:
            node = stack.pop()
            for nb in self.adj[node]:
                if seen[nb]:
                    continue
                seen[nb] = True
                if node < m:  # row -> col
                    v[nb - m] = cost[node, nb - m] - u[node]
                else:  # col -> row
                    u[nb] = cost[nb, node - m] - v[node - m]
                stack.append(nb)
        if not seen.all():
            raise SolverToleranceError("transport basis is not spanning")
        return u, v

    def flows_from(self, supply, demand):
        """Unique basic flows for given marginals (leaf elimination)."""
        m, n = self.m, self.n
        rem = np.concatenate([supply, demand]).astype(np.float64)
        deg = {node: len(self.adj[node]) for node in range(m + n)}
        adj_copy = [dict(d) for d in self.adj]
        leaves = [node for node, dg in deg.items() if dg == 1]
        flows = np.zeros(len(self.arcs))
        while leaves:
            node = leaves.pop()
            if deg[node] != 1:
                continue
            (nb, idx), = adj_copy[node].items()
            f = rem[node]
            flows[idx] = f
            rem[node] = 0.0
            rem[nb] -= f
            del adj_copy[node][nb]
            del adj_copy[nb][node]
            deg[node] -= 1
            deg[nb] -= 1
            if deg[nb] == 1:
                leaves.append(nb)
        return flows


def _least_cost_start(cost, supply, demand):
    """Greedy least-cost allocation, completed to a spanning tree.

    Visiting cells in cost order and saturating row or column at each
    assignment yields an acyclic allocation close to optimal, which
    keeps the pivot count low.  Simultaneous row+column saturation
    (degenerate ties) can leave a forest; zero-flow arcs then join the
    components.
    """
    m, n = cost.shape
    s = supply.copy()
    d = demand.copy()
    arcs = []
    remaining = s.sum()
    for idx in np.argsort(cost, axis=None, kind="stable"):
        if remaining <= 0.0:
            break
        i, j = divmod(int(idx), n)
        if s[i] <= 0.0 or d[j] <= 0.0:
            continue
        f = min(s[i], d[j])
        arcs.append([i, j, f])
        s[i] -= f
        d[j] -= f
        remaining -= f

    if len(arcs) < m + n - 1:
        # degenerate ties left a forest: join components with zero arcs
        parent = list(range(m + n))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for i, j, _ in arcs:
            parent[find(i)] = find(m + j)
        while len(arcs) < m + n - 1:
            root_row: dict[int, int] = {}
            root_col: dict[int, int] = {}
            for i in range(m):
                root_row.setdefault(find(i), i)
            for j in range(n):
                root_col.setdefault(find(m + j), j)
            added = False
            for ra, i in sorted(root_row.items()):
                for rb, j in sorted(root_col.items()):
                    if ra != rb:
                        arcs.append([i, j, 0.0])
                        parent[find(i)] = find(m + j)
                        added = True
                        break
                if added:
                    break
            if not added:
                raise SolverToleranceError("could not complete transport basis")
    return arcs


def solve_transport(cost, supply, demand, tol: float = 1e-9, max_iter: int | None = None):
    """Balanced transportation problem: minimize sum c_ij f_ij.

    Pivots on slightly perturbed supplies (anti-degeneracy), then
    recomputes exact flows and the exact objective on the final basis.
    """
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    supply = np.asarray(supply, dtype=np.float64)
    demand = np.asarray(demand, dtype=np.float64)
    m, n = cost.shape
    total = supply.sum()
    if abs(total - demand.sum()) > 1e-9 * max(1.0, total):
        raise ValueError("unbalanced transportation problem")
    if max_iter is None:
        max_iter = 200 * (m + n) + 5000

    # distinct-ordered perturbation of the marginals kills ties in the
    # ratio test; the basis it selects is optimal for the exact data too
    tau = 1e-12 * max(total, 1.0) / (m * (m + 1) / 2.0 + 1.0)
    pert_s = supply + tau * np.arange(1, m + 1)
    pert_d = demand.copy()
    pert_d[-1] += tau * (m * (m + 1) / 2.0)

    tree = _Tree(m, n, _least_cost_start(cost, pert_s, pert_d))
    scale = max(1.0, float(np.abs(cost).max()))
    piv_tol = 1e-12 * scale

    for _ in range(max_iter):
        u, v = tree.potentials(cost)
        red = cost - u[:, None] - v[None, :]
        flat_idx = int(np.argmin(red))
        i_in, j_in = divmod(flat_idx, n)
        if red[i_in, j_in] >= -piv_tol:
            break
        # cycle: entering arc + tree path from its column back to its row
        nodes = tree.path(m + j_in, i_in)
        theta = np.inf
        leaving = None
        sign = -1  # first path arc leaves the entering column: gets -theta
        path_arcs = []
        for a, b in zip(nodes[:-1], nodes[1:]):
            idx = tree.adj[a][b]
            path_arcs.append((idx, sign))
            if sign < 0 and tree.arcs[idx][2] < theta:
                theta = tree.arcs[idx][2]
                leaving = idx
            sign = -sign
        for idx, sgn in path_arcs:
            tree.arcs[idx][2] += sgn * theta
        tree.remove(leaving)
        tree.add([i_in, j_in, theta])
    else:
        raise SolverToleranceError("transportation simplex iteration limit")

    flows = tree.flows_from(supply, demand)
    value = float(sum(cost[a[0], a[1]] * f for a, f in zip(tree.arcs, flows)))
    u, v = tree.potentials(cost)
    red = cost - u[:, None] - v[None, :]
    residual = max(0.0, -float(red.min()))
    residual = max(residual, max(0.0, -float(flows.min(initial=0.0))))
    if residual > tol * max(1.0, scale):
        raise SolverToleranceError("transport residual %.3e" % residual)
    return TransportResult(value=value, u=u, v=v, residual=residual)


# ----------------------------------------------------------------------
# flat metric front-end
# ----------------------------------------------------------------------

def _net_weights(points_a, w_a, points_b, w_b):
    """Union support and exactly-merged signed weights mu - nu.

    Points merge only on bitwise equality; no epsilon matching."""
    seen: dict[bytes, int] = {}
    pts: list[np.ndarray] = []
    net: list[float] = []
    for arr, ws, sgn in ((points_a, w_a, 1.0), (points_b, w_b, -1.0)):
        arr = np.asarray(arr, dtype=np.float64)
        for row, w in zip(arr, ws):
            key = row.tobytes()
            k = seen.get(key)
            if k is None:
                seen[key] = len(pts)
                pts.append(row)
                net.append(sgn * float(w))
            else:
                net[k] += sgn * float(w)
    if not pts:
        return np.zeros((0, 1)), np.zeros(0)
    return np.array(pts), np.array(net)


def flat_metric(points_a, w_a, points_b, w_b):
    """Exact flat (bounded-Lipschitz) distance between atomic measures.

    Returns (value, residual) where residual is the solver's optimality
    defect (0 means a certified optimum up to float roundoff).
    """
    pts, net = _net_weights(points_a, w_a, points_b, w_b)
    # canonical support order and orientation: the optimum only sees
    # the signed atom set of mu - nu (and is invariant under its
    # negation), so both argument orders are routed through identical
    # arithmetic and the metric is exactly symmetric
    if len(net):
        order = sorted(range(len(net)), key=lambda i: pts[i].tobytes())
        pts = pts[order]
        net = net[order]
    nz = net[net != 0.0]
    if nz.size and nz[0] < 0.0:
        net = -net
    pos = net > 0.0
    neg = net < 0.0
    P = float(net[pos].sum()) if pos.any() else 0.0
    M = float(-net[neg].sum()) if neg.any() else 0.0
    if P == 0.0 and M == 0.0:
        return 0.0, 0.0
    if P == 0.0 or M == 0.0:
        # one-sided surplus: optimal phi is the constant +/-1
        return max(P, M), 0.0
    zp = pts[pos]
    zn = pts[neg]
    a = net[pos]
    b = -net[neg]
    diff = zp[:, None, :] - zn[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    mm, nn = dist.shape
    cost = np.ones((mm + 1, nn + 1))
    cost[:mm, :nn] = np.minimum(dist, 2.0)
    cost[mm, nn] = 0.0
    supply = np.concatenate([a, [M]])
    demand = np.concatenate([b, [P]])
    res = solve_transport(cost, supply, demand)
    return res.value, res.residual
