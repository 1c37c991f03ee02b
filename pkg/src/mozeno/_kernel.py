"""Compiled twin of :class:`mozeno.planner.Planner` search.

Reproduces the pure-Python search step for step (same node order, same
tie-breaks, same path reconstruction); the Python version is the reference.
Only usable while states fit in a signed 64-bit mask.
"""

from __future__ import annotations

import numpy as np
from numba import njit, types
from numba.typed import Dict

BIG = np.int64(1) << np.int64(60)
MAX_ATOMS = 62

_KEY = types.UniTuple(types.int64, 3)


def new_cache():
    return Dict.empty(key_type=_KEY, value_type=types.int64)


@njit(cache=True)
def _h_add(state, goal, w, T, W, want_plan):
    (n_atoms, pre_ptr, pre_idx, add_ptr, add_idx, cons_ptr, cons_idx, n_pre,
     key_ptr, key_idx, pre_mask, add_mask, del_mask) = T
    (cost, level, support, done, remaining, acc, act_level, chosen, rp) = W
    one = np.int64(1)
    open_goal = goal & ~state
    if open_goal == 0:
        return np.int64(0), 0
    n_act = n_pre.shape[0]
    for i in range(n_atoms):
        cost[i] = BIG
        done[i] = 0
        level[i] = 0
        support[i] = -1
        if (state >> i) & one:
            cost[i] = 0
    for a in range(n_act):
        remaining[a] = n_pre[a]
        acc[a] = 0
        act_level[a] = 0
        if n_pre[a] == 0:
            for k in range(add_ptr[a], add_ptr[a + 1]):
                j = add_idx[k]
                if w[a] < cost[j]:
                    cost[j] = w[a]
                    support[j] = a
                    level[j] = 1
    pending = open_goal
    while pending != 0:
        best = -1
        bc = BIG
        for i in range(n_atoms):
            if done[i] == 0 and cost[i] < bc:
                bc = cost[i]
                best = i
        if best < 0:
            break
        done[best] = 1
        pending &= ~(one << best)
        li = level[best]
        for k in range(cons_ptr[best], cons_ptr[best + 1]):
            a = cons_idx[k]
            remaining[a] -= 1
            acc[a] += bc
            if li > act_level[a]:
                act_level[a] = li
            if remaining[a] == 0:
                ca = acc[a] + w[a]
                la = act_level[a] + 1
                for m in range(add_ptr[a], add_ptr[a + 1]):
                    j = add_idx[m]
                    if ca < cost[j]:
                        cost[j] = ca
                        support[j] = a
                        level[j] = la
    if pending != 0:
        return BIG, 0
    value = np.int64(0)
    for j in range(n_atoms):
        if (open_goal >> j) & one:
            value += cost[j]
    if not want_plan:
        return value, 0
    for a in range(n_act):
        chosen[a] = -1
    # backchain best supporters; the resulting set does not depend on visit order
    seen = state
    top = 0
    stack = done  # reuse as an int stack
    for j in range(n_atoms):
        if (open_goal >> j) & one:
            stack[top] = j
            top += 1
    while top > 0:
        top -= 1
        j = stack[top]
        if (seen >> j) & one:
            continue
        seen |= one << j
        a = support[j]
        if chosen[a] >= 0:
            continue
        chosen[a] = level[j]
        for k in range(pre_ptr[a], pre_ptr[a + 1]):
            stack[top] = pre_idx[k]
            top += 1
    n_rp = 0
    max_level = 0
    for a in range(n_act):
        if chosen[a] > max_level:
            max_level = chosen[a]
    for lv in range(max_level + 1):
        for a in range(n_act):
            if chosen[a] == lv:
                rp[n_rp] = a
                n_rp += 1
    return value, n_rp


@njit(cache=True)
def _cached_h(state, goal, strat, w, T, W, cache, limit):
    key = (state, goal, np.int64(strat))
    if key in cache:
        return cache[key]
    v, _ = _h_add(state, goal, w, T, W, False)
    if len(cache) >= limit:
        cache.clear()
    cache[key] = v
    return v


@njit(cache=True)
def _push(hh, hg, hc, hn, size, h, g, c, n):
    i = size
    hh[i] = h
    hg[i] = g
    hc[i] = c
    hn[i] = n
    while i > 0:
        p = (i - 1) >> 1
        if (hh[p], hg[p], hc[p]) > (hh[i], hg[i], hc[i]):
            hh[p], hh[i] = hh[i], hh[p]
            hg[p], hg[i] = hg[i], hg[p]
            hc[p], hc[i] = hc[i], hc[p]
            hn[p], hn[i] = hn[i], hn[p]
            i = p
        else:
            break
    return size + 1


@njit(cache=True)
def _pop(hh, hg, hc, hn, size):
    g, n = hg[0], hn[0]
    size -= 1
    hh[0], hg[0], hc[0], hn[0] = hh[size], hg[size], hc[size], hn[size]
    i = 0
    while True:
        left = 2 * i + 1
        if left >= size:
            break
        small = left
        right = left + 1
        if right < size and (hh[right], hg[right], hc[right]) < (hh[left], hg[left], hc[left]):
            small = right
        if (hh[small], hg[small], hc[small]) < (hh[i], hg[i], hc[i]):
            hh[small], hh[i] = hh[i], hh[small]
            hg[small], hg[i] = hg[i], hg[small]
            hc[small], hc[i] = hc[i], hc[small]
            hn[small], hn[i] = hn[i], hn[small]
            i = small
        else:
            break
    return g, n, size


@njit(cache=True)
def _expand(s, w, n_rp, T, W, C, abuf, a_top):
    """Write the children of ``s`` into C; return (count, new a_top)."""
    (n_atoms, pre_ptr, pre_idx, add_ptr, add_idx, cons_ptr, cons_idx, n_pre,
     key_ptr, key_idx, pre_mask, add_mask, del_mask) = T
    rp = W[8]
    used = W[7]
    cstate, cstart, clen, ccost = C
    one = np.int64(1)
    n = 0
    if n_rp > 0:
        cur = s
        start = a_top
        cost = np.int64(0)
        for q in range(n_rp):
            used[q] = 0
        progress = True
        while progress:
            progress = False
            for q in range(n_rp):
                if used[q] == 0:
                    a = rp[q]
                    if pre_mask[a] & ~cur == 0:
                        cur = (cur & ~del_mask[a]) | add_mask[a]
                        used[q] = 1
                        abuf[a_top] = a
                        a_top += 1
                        cost += w[a]
                        progress = True
                        break
        if a_top > start:
            cstate[n] = cur
            cstart[n] = start
            clen[n] = a_top - start
            ccost[n] = cost
            n += 1
    for a in range(n_pre.shape[0]):
        if n_pre[a] == 0:
            cstate[n] = (s & ~del_mask[a]) | add_mask[a]
            cstart[n] = a_top
            clen[n] = 1
            ccost[n] = w[a]
            abuf[a_top] = a
            a_top += 1
            n += 1
    for atom in range(n_atoms):
        if (s >> atom) & one:
            for k in range(key_ptr[atom], key_ptr[atom + 1]):
                a = key_idx[k]
                if pre_mask[a] & ~s == 0:
                    cstate[n] = (s & ~del_mask[a]) | add_mask[a]
                    cstart[n] = a_top
                    clen[n] = 1
                    ccost[n] = w[a]
                    abuf[a_top] = a
                    a_top += 1
                    n += 1
    return n, a_top


@njit(cache=True)
def solve(initial, goal, strat, budget, weights, T, W, S, C, cache, limit, out):
    """Return (n_actions or -1 on failure, expanded nodes); plan written to ``out``."""
    (hh, hg, hc, hn, nstate, nparent, nstart, nlen, abuf) = S
    cstate, cstart, clen, ccost = C
    w = weights[strat]
    if goal & ~initial == 0:
        return 0, 0
    h0 = _cached_h(initial, goal, strat, w, T, W, cache, limit)
    if h0 >= BIG:
        return -1, 0
    best_g = Dict.empty(key_type=types.int64, value_type=types.int64)
    node_of = Dict.empty(key_type=types.int64, value_type=types.int64)
    best_g[initial] = 0
    nstate[0] = initial
    nparent[0] = initial
    nstart[0] = 0
    nlen[0] = 0
    node_of[initial] = 0
    n_nodes = 1
    a_top = 0
    size = _push(hh, hg, hc, hn, 0, h0, np.int64(0), np.int64(0), 0)
    counter = np.int64(1)
    expanded = 0
    goal_node = -1
    while size > 0 and goal_node < 0:
        g, node, size = _pop(hh, hg, hc, hn, size)
        s = nstate[node]
        if g > best_g[s]:
            continue
        if expanded >= budget:
            return -1, expanded
        expanded += 1
        _, n_rp = _h_add(s, goal, w, T, W, True)
        n_children, a_top = _expand(s, w, n_rp, T, W, C, abuf, a_top)
        for c in range(n_children):
            child = cstate[c]
            g2 = g + ccost[c]
            if child in best_g and g2 >= best_g[child]:
                continue
            best_g[child] = g2
            nstate[n_nodes] = child
            nparent[n_nodes] = s
            nstart[n_nodes] = cstart[c]
            nlen[n_nodes] = clen[c]
            node_of[child] = n_nodes
            n_nodes += 1
            if goal & ~child == 0:
                goal_node = n_nodes - 1
                break
            h = _cached_h(child, goal, strat, w, T, W, cache, limit)
            if h >= BIG:
                continue
            size = _push(hh, hg, hc, hn, size, h, g2, counter, n_nodes - 1)
            counter += 1
    if goal_node < 0:
        return -1, expanded
    # walk back through the latest parent of each state, as the reference does
    total = 0
    node = goal_node
    while True:
        total += nlen[node]
        ps = nparent[node]
        if ps == initial:
            break
        node = node_of[ps]
    pos = total
    node = goal_node
    while True:
        ln = nlen[node]
        pos -= ln
        for q in range(ln):
            out[pos + q] = abuf[nstart[node] + q]
        ps = nparent[node]
        if ps == initial:
            break
        node = node_of[ps]
    return total, expanded


class CompiledSearch:
    """Packs a task into flat arrays and owns the reusable search buffers."""

    def __init__(self, task, weights_by_strategy, budget: int):
        n = len(task.atoms)
        if n > MAX_ATOMS:
            raise ValueError(f"{n} atoms do not fit in a 64-bit state")
        acts = task.actions
        A = len(acts)

        def csr(lists):
            ptr = np.zeros(len(lists) + 1, np.int64)
            for i, xs in enumerate(lists):
                ptr[i + 1] = ptr[i] + len(xs)
            idx = np.array([x for xs in lists for x in xs], np.int64)
            return ptr, idx

        pre_ptr, pre_idx = csr(task.pre_lists)
        add_ptr, add_idx = csr(task.add_lists)
        cons_ptr, cons_idx = csr(task.consumers)
        keyed = [[] for _ in range(n)]
        for a in acts:
            if a.pre:
                keyed[(a.pre & -a.pre).bit_length() - 1].append(a.index)
        key_ptr, key_idx = csr(keyed)
        self.T = (np.int64(n), pre_ptr, pre_idx, add_ptr, add_idx, cons_ptr, cons_idx,
                  np.array([len(p) for p in task.pre_lists], np.int64), key_ptr, key_idx,
                  np.array([a.pre for a in acts], np.int64),
                  np.array([a.add for a in acts], np.int64),
                  np.array([a.delete for a in acts], np.int64))
        self.W = (np.zeros(n, np.int64), np.zeros(n, np.int64), np.zeros(n, np.int64),
                  np.zeros(max(n, A * 4), np.int64), np.zeros(A, np.int64),
                  np.zeros(A, np.int64), np.zeros(A, np.int64), np.zeros(A, np.int64),
                  np.zeros(A, np.int64))
        self.C = tuple(np.zeros(2 * A + 1, np.int64) for _ in range(4))
        self.weights = np.array(weights_by_strategy, np.int64)
        self.n_actions = A
        self.cache = new_cache()
        self._alloc(budget)

    def _alloc(self, budget: int) -> None:
        A = self.n_actions
        nodes = budget * (2 * A + 1) + 2
        self.capacity = budget
        self.S = (np.zeros(nodes, np.int64), np.zeros(nodes, np.int64),
                  np.zeros(nodes, np.int64), np.zeros(nodes, np.int64),
                  np.zeros(nodes, np.int64), np.zeros(nodes, np.int64),
                  np.zeros(nodes, np.int64), np.zeros(nodes, np.int64),
                  np.zeros(budget * (3 * A + 1) + A, np.int64))
        self.out = np.zeros(budget * (3 * A + 1) + A, np.int64)

    def solve(self, initial: int, goal: int, strat: int, budget: int, limit: int):
        if budget > self.capacity:
            self._alloc(budget)
        n, expanded = solve(np.int64(initial), np.int64(goal), strat, budget, self.weights,
                            self.T, self.W, self.S, self.C, self.cache, limit, self.out)
        if n < 0:
            return None, expanded
        return self.out[:n].tolist(), expanded
