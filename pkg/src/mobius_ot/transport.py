"""Exact discrete Kantorovich transport by the transportation simplex.

The solver walks vertices of the transportation polytope, so with uniform
masses ``1/N`` every returned plan is ``1/N`` times a (partial) permutation.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import InfeasibleProblemError, NonIntegralPlanError, NumericalError, ValidationError

MASS_TOL = 1e-10
INTEGRAL_TOL = 1e-9
CERT_TOL = 1e-8
# consecutive degenerate pivots tolerated before switching to Bland's rule
DEGENERATE_STREAK = 20


@dataclass(frozen=True)
class TransportProblem:
    cost: np.ndarray
    mu_masses: np.ndarray
    nu_masses: np.ndarray
    Q: float = 1.0

    def __post_init__(self):
        d = np.asarray(self.cost, dtype=float)
        mu = np.asarray(self.mu_masses, dtype=float).reshape(-1)
        nu = np.asarray(self.nu_masses, dtype=float).reshape(-1)
        if d.ndim != 2 or d.shape != (len(mu), len(nu)):
            raise ValidationError(f"cost shape {d.shape} does not match masses ({len(mu)}, {len(nu)})")
        if d.size == 0:
            raise ValidationError("empty transport problem")
        if not np.all(np.isfinite(d)) or (d < 0).any():
            raise ValidationError("costs must be finite and nonnegative")
        if (mu < 0).any() or (nu < 0).any():
            raise ValidationError("masses must be nonnegative")
        for name, m in (("mu", mu), ("nu", nu)):
            if abs(m.sum() - 1) > MASS_TOL:
                raise InfeasibleProblemError(f"{name} masses sum to {m.sum():.12g}, not 1")
        if not 0 < self.Q <= 1:
            raise InfeasibleProblemError(f"Q={self.Q} outside (0, 1]")
        object.__setattr__(self, "cost", d)
        object.__setattr__(self, "mu_masses", mu)
        object.__setattr__(self, "nu_masses", nu)
        object.__setattr__(self, "Q", float(self.Q))

    @property
    def mode(self):
        return "full" if self.Q == 1 else "partial"

    @classmethod
    def uniform(cls, cost, Q=1.0):
        cost = np.asarray(cost, dtype=float)
        n, p = cost.shape
        return cls(cost, np.full(n, 1 / n), np.full(p, 1 / p), Q)


@dataclass(frozen=True)
class TransportPlan:
    """Optimal plan with dual potentials.

    ``u_i + v_j <= d_ij`` everywhere with equality on the support. In partial
    mode ``slack_u``/``slack_v`` are the potentials of the dummy column and
    dummy row used by the balanced reduction.
    """

    pi: np.ndarray
    objective: float
    u: np.ndarray
    v: np.ndarray
    Q: float = 1.0
    exact_objective: Fraction | None = None
    iterations: int = 0
    slack_u: float = 0.0
    slack_v: float = 0.0
    basis: list = field(default_factory=list, repr=False)

    @property
    def mode(self):
        return "full" if self.Q == 1 else "partial"

    def to_dict(self, pairs=None):
        out = {
            "pi": self.pi.tolist(),
            "objective": self.objective,
            "Q": self.Q,
            "duals": {"u": self.u.tolist(), "v": self.v.tolist()},
        }
        if pairs is not None:
            out["pairs"] = [list(p) for p in pairs]
        return out

    def to_json(self, pairs=None):
        return json.dumps(self.to_dict(pairs))


def _scale_to_int(masses_list, Q):
    """Common denominator making every mass (and Q) integral, or None."""
    scale = 1
    for m in masses_list:
        scale = math.lcm(scale, len(m))
    out = []
    for m in masses_list:
        s = m * scale
        r = np.rint(s)
        if np.abs(s - r).max() > 1e-9:
            return None
        out.append(r.astype(np.int64))
    q = Q * scale
    if abs(q - round(q)) > 1e-9:
        return None
    return scale, out, int(round(q))


def _northwest(supply, demand):
    """Northwest-corner basis with exactly ``m + n - 1`` cells."""
    m, n = len(supply), len(demand)
    s, d = list(supply), list(demand)
    flow = {}
    i = j = 0
    while True:
        row_first = s[i] <= d[j]
        x = s[i] if row_first else d[j]
        flow[(i, j)] = x
        if i == m - 1 and j == n - 1:
            break
        # advancing one index at a time keeps the basis a spanning tree,
        # placing degenerate zero cells when both run out together
        if (row_first and i < m - 1) or j == n - 1:
            d[j] -= x
            s[i] = x * 0
            i += 1
        else:
            s[i] -= x
            d[j] = x * 0
            j += 1
    return flow


def _duals(cost, basis, m, n):
    adj = [[] for _ in range(m + n)]
    for i, j in basis:
        adj[i].append(m + j)
        adj[m + j].append(i)
    pot = [None] * (m + n)
    pot[0] = cost[0, 0] * 0
    queue = deque([0])
    while queue:
        a = queue.popleft()
        for b in adj[a]:
            if pot[b] is None:
                if a < m:
                    pot[b] = cost[a, b - m] - pot[a]
                else:
                    pot[b] = cost[b, a - m] - pot[a]
                queue.append(b)
    if any(p is None for p in pot):
        raise NumericalError("basis is not a spanning tree")
    return np.array(pot[:m], dtype=cost.dtype), np.array(pot[m:], dtype=cost.dtype), adj


def _cycle(adj, m, i, j):
    """Tree path from row ``i`` to column ``j``, as a list of cells."""
    start, goal = i, m + j
    prev = {start: None}
    queue = deque([start])
    while queue:
        a = queue.popleft()
        if a == goal:
            break
        for b in adj[a]:
            if b not in prev:
                prev[b] = a
                queue.append(b)
    nodes = [goal]
    while prev[nodes[-1]] is not None:
        nodes.append(prev[nodes[-1]])
    nodes.reverse()
    cells = []
    for a, b in zip(nodes, nodes[1:]):
        cells.append((a, b - m) if a < m else (b, a - m))
    return cells


def _simplex(cost, supply, demand, max_iter=None):
    """Transportation simplex on a balanced problem.

    Dantzig's entering rule, with Bland's rule during long degenerate runs.
    Leaving-variable ties go to the lowest flat index.
    """
    m, n = cost.shape
    exact = np.issubdtype(cost.dtype, np.integer)
    tol = 0 if exact else 1e-12 * (1 + float(np.abs(cost).max()))
    flow = _northwest(supply, demand)
    basis = set(flow)
    max_iter = max_iter or 50 * (m + n) ** 2
    streak = 0
    it = 0
    while True:
        u, v, adj = _duals(cost, basis, m, n)
        red = cost - u[:, None] - v[None, :]
        if streak >= DEGENERATE_STREAK:
            neg = np.flatnonzero(red.reshape(-1) < -tol)
            if neg.size == 0:
                break
            k = int(neg[0])
        else:
            k = int(np.argmin(red))
            if not red.flat[k] < -tol:
                break
        ei, ej = divmod(k, n)
        path = _cycle(adj, m, ei, ej)
        # path alternates: first cell shares row ei, so it loses flow
        minus = path[0::2]
        theta = min(flow[c] for c in minus)
        leave = min((c for c in minus if flow[c] == theta), key=lambda c: c[0] * n + c[1])
        for c in minus:
            flow[c] = flow[c] - theta
        for c in path[1::2]:
            flow[c] = flow[c] + theta
        flow[(ei, ej)] = theta
        basis.add((ei, ej))
        basis.discard(leave)
        del flow[leave]
        streak = streak + 1 if theta == 0 else 0
        it += 1
        if it > max_iter:
            raise NumericalError("transport simplex exceeded its iteration limit")
    return flow, basis, u, v, it


def _solve(p: TransportProblem, Q):
    d = p.cost
    m, n = d.shape
    ints = _scale_to_int([p.mu_masses, p.nu_masses], Q)
    integral_cost = np.all(d == np.rint(d)) and np.abs(d).max() < 2**40
    partial = Q < 1
    if ints is not None:
        scale, (sup, dem), q = ints
        sup, dem = [int(x) for x in sup], [int(x) for x in dem]
        slack = scale - q
    else:
        scale = 1
        sup, dem = p.mu_masses.tolist(), p.nu_masses.tolist()
        slack = 1.0 - Q
    c = d.astype(np.int64) if integral_cost else d.copy()
    if partial:
        big = 1 + max(m, n) * c.max()
        aug = np.zeros((m + 1, n + 1), dtype=c.dtype)
        aug[:m, :n] = c
        aug[m, n] = big
        sup = sup + [slack]
        dem = dem + [slack]
        c = aug
    flow, basis, u, v, it = _simplex(c, sup, dem)
    F = np.zeros(c.shape, dtype=object if ints is not None else float)
    for (i, j), x in flow.items():
        F[i, j] = x
    if partial:
        if F[m, n] != 0:
            raise NumericalError("partial reduction used the forbidden dummy arc")
        slack_u, slack_v = u[m], v[n]
        F, u, v = F[:m, :n], u[:m], v[:n]
    else:
        slack_u = slack_v = 0
    exact_obj = None
    if ints is not None:
        total = sum(int(d_ij) * int(x) for d_ij, x in zip(c[:m, :n].reshape(-1).tolist(), F.reshape(-1).tolist())) \
            if integral_cost else None
        if total is not None:
            exact_obj = Fraction(total, scale)
        pi = F.astype(float) / scale
    else:
        pi = F.astype(float)
    pi = np.asarray(pi, dtype=float)
    objective = float(np.sum(pi * d))
    cells = sorted(b for b in basis if b[0] < m and b[1] < n)
    return TransportPlan(pi, objective, np.asarray(u, dtype=float), np.asarray(v, dtype=float), float(Q),
                         exact_obj, it, float(slack_u), float(slack_v), cells)


def solve_full(p: TransportProblem) -> TransportPlan:
    """Exact optimum of the balanced transportation LP."""
    plan = _solve(p, 1.0)
    check_certificate(p, plan, 1.0)
    return plan


def solve_partial(p: TransportProblem, Q=None) -> TransportPlan:
    """Exact optimum shipping total mass ``Q`` under marginal inequalities.

    Solved as a balanced problem with a dummy row and column of mass ``1 - Q``
    and a large finite cost on the dummy-dummy arc.
    """
    Q = p.Q if Q is None else float(Q)
    if not 0 < Q <= 1:
        raise InfeasibleProblemError(f"Q={Q} outside (0, 1]")
    plan = _solve(p, Q)
    check_certificate(p, plan, Q)
    return plan


def solve(p: TransportProblem) -> TransportPlan:
    return solve_full(p) if p.Q == 1 else solve_partial(p)


def certificate_violations(p: TransportProblem, plan: TransportPlan, Q=None):
    """Largest primal and dual violations of the optimality conditions."""
    Q = plan.Q if Q is None else Q
    pi, d = plan.pi, p.cost
    rows, cols = pi.sum(axis=1), pi.sum(axis=0)
    red = d - plan.u[:, None] - plan.v[None, :]
    out = {
        "negative_flow": float(max(0.0, -pi.min())),
        "dual_infeasibility": float(max(0.0, -red.min())),
        "slackness": float(np.abs(red[pi > 0]).max(initial=0.0)),
        "total": abs(float(pi.sum()) - Q),
    }
    if Q == 1:
        out["rows"] = float(np.abs(rows - p.mu_masses).max())
        out["cols"] = float(np.abs(cols - p.nu_masses).max())
    else:
        out["rows"] = float(max(0.0, (rows - p.mu_masses).max()))
        out["cols"] = float(max(0.0, (cols - p.nu_masses).max()))
        # dummy arcs: cost 0 from real rows / into real columns
        out["dual_infeasibility"] = max(out["dual_infeasibility"],
                                        float(max(0.0, (plan.u + plan.slack_v).max())),
                                        float(max(0.0, (plan.v + plan.slack_u).max())))
    return out


def check_certificate(p, plan, Q=None):
    viol = certificate_violations(p, plan, Q)
    primal = max(viol["negative_flow"], viol["rows"], viol["cols"], viol["total"])
    dual = max(viol["dual_infeasibility"], viol["slackness"])
    if primal > INTEGRAL_TOL or dual > CERT_TOL:
        raise NumericalError(f"optimality certificate failed: {viol}")
    return viol


def extract_correspondence(plan: TransportPlan, N=None):
    """Pairs ``(i, j)`` carrying mass ``1/N`` in an equal-mass vertex plan."""
    pi = plan.pi
    N = N or pi.shape[0]
    unit = 1.0 / N
    inner = (pi > INTEGRAL_TOL) & (pi < unit - INTEGRAL_TOL)
    if inner.any():
        i, j = np.argwhere(inner)[0]
        raise NonIntegralPlanError(f"plan entry pi[{i},{j}]={pi[i, j]:.3g} is not in {{0, 1/N}}")
    pairs = [(int(i), int(j)) for i, j in np.argwhere(pi > unit / 2)]
    rows = [i for i, _ in pairs]
    cols = [j for _, j in pairs]
    if len(set(rows)) != len(rows) or len(set(cols)) != len(cols):
        raise NonIntegralPlanError("plan support is not injective")
    return pairs


def transport_cost(plan, cost):
    pi = plan.pi if isinstance(plan, TransportPlan) else np.asarray(plan, dtype=float)
    cost = np.asarray(cost, dtype=float)
    if pi.shape != cost.shape:
        raise ValidationError(f"plan shape {pi.shape} does not match cost shape {cost.shape}")
    return float(np.sum(pi * cost))
