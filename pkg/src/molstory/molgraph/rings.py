"""Smallest set of smallest rings on a plain undirected graph."""
from collections import deque


def _adjacency(n_atoms, edges):
    adj = [[] for _ in range(n_atoms)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    for nbrs in adj:
        nbrs.sort()
    return adj


def count_components(n_atoms, edges):
    adj = _adjacency(n_atoms, edges)
    seen = [False] * n_atoms
    count = 0
    for start in range(n_atoms):
        if seen[start]:
            continue
        count += 1
        seen[start] = True
        stack = [start]
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if not seen[v]:
                    seen[v] = True
                    stack.append(v)
    return count


def normalize_cycle(cycle):
    """Rotate a cycle to start at its smallest atom, heading to the smaller neighbour."""
    cycle = list(cycle)
    k = cycle.index(min(cycle))
    cycle = cycle[k:] + cycle[:k]
    if len(cycle) > 2 and cycle[-1] < cycle[1]:
        cycle = [cycle[0]] + cycle[1:][::-1]
    return tuple(cycle)


def _bfs_tree(adj, root):
    parent = {root: None}
    queue = deque([root])
    while queue:
        u = queue.popleft()
        for v in adj[u]:  # sorted, so the smallest-index parent wins
            if v not in parent:
                parent[v] = u
                queue.append(v)
    return parent


def _path_from_root(parent, node):
    path = []
    while node is not None:
        path.append(node)
        node = parent[node]
    return path[::-1]


def _cycle_edges_mask(cycle, edge_index):
    mask = 0
    for k in range(len(cycle)):
        a, b = cycle[k], cycle[(k + 1) % len(cycle)]
        mask |= 1 << edge_index[(min(a, b), max(a, b))]
    return mask


def find_sssr(n_atoms, edges):
    """Return a minimum cycle basis as normalized atom cycles.

    Candidates are Horton cycles (shortest path from a root to both ends of
    an edge); they are taken smallest-first, ties broken by the atom tuple,
    and kept only when independent over GF(2).
    """
    edges = [(min(u, v), max(u, v)) for u, v in edges]
    n_rings = len(edges) - n_atoms + count_components(n_atoms, edges)
    if n_rings <= 0:
        return []
    adj = _adjacency(n_atoms, edges)
    edge_index = {e: k for k, e in enumerate(edges)}

    candidates = set()
    for root in range(n_atoms):
        parent = _bfs_tree(adj, root)
        for x, y in edges:
            if x not in parent or y not in parent:
                continue
            px = _path_from_root(parent, x)
            py = _path_from_root(parent, y)
            if set(px) & set(py) != {root}:
                continue
            cycle = px + py[::-1][:-1]
            if len(cycle) >= 3:
                candidates.add(normalize_cycle(cycle))

    basis = {}  # pivot bit -> reduced vector
    rings = []
    for cycle in sorted(candidates, key=lambda c: (len(c), c)):
        vec = _cycle_edges_mask(cycle, edge_index)
        while vec:
            pivot = vec.bit_length() - 1
            if pivot not in basis:
                basis[pivot] = vec
                rings.append(cycle)
                break
            vec ^= basis[pivot]
        if len(rings) == n_rings:
            break
    return rings
