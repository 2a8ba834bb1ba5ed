"""Friend graphs: edge-list loading, synthetic small worlds, genuine/polluter labels."""

from __future__ import annotations

import collections
import math
import random
from dataclasses import dataclass, field
from pathlib import Path

import networkx as nx

POLLUTER = -1
DEFAULT_RESEEDS = 100


class TraceError(ValueError):
    pass


class LabelingError(ValueError):
    pass


@dataclass
class SocialGraph:
    graph: nx.Graph
    # user -> genuine group index, or POLLUTER
    labels: dict[int, int] = field(default_factory=dict)

    @property
    def users(self) -> list[int]:
        return sorted(self.graph.nodes)

    def friends(self, user: int) -> list[int]:
        return sorted(self.graph.adj[user])

    def is_polluter(self, user: int) -> bool:
        return self.labels.get(user) == POLLUTER

    def genuine(self) -> list[int]:
        return sorted(u for u, g in self.labels.items() if g != POLLUTER)

    def polluters(self) -> list[int]:
        return sorted(u for u, g in self.labels.items() if g == POLLUTER)

    def groups(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = collections.defaultdict(list)
        for u, g in sorted(self.labels.items()):
            if g != POLLUTER:
                out[g].append(u)
        return dict(out)


def load_trace(path: str | Path) -> SocialGraph:
    """Read "u v" integer pairs, one per line; '#' starts a comment."""
    g = nx.Graph()
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            try:
                if len(parts) != 2:
                    raise ValueError
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise TraceError(f"{path}:{lineno}: expected two integers, got {line!r}") from None
            g.add_node(u)
            g.add_node(v)
            if u != v:
                g.add_edge(u, v)
    return SocialGraph(g)


def synth_graph(n: int, avg_degree: float, rng: random.Random, rewire: float = 0.1) -> SocialGraph:
    """Watts-Strogatz small world on users 0..n-1, topped up to round(n * d / 2) edges."""
    if n < 2:
        raise ValueError("need at least two users")
    if not 0 < avg_degree < n:
        raise ValueError(f"average degree must lie in (0, {n})")
    target = round(n * avg_degree / 2)
    k = 2 * int(avg_degree // 2)
    if k >= 2:
        g = nx.watts_strogatz_graph(n, k, rewire, seed=rng.getrandbits(32))
    else:
        g = nx.empty_graph(n)
    while g.number_of_edges() < target:
        u, v = rng.randrange(n), rng.randrange(n)
        if u != v:
            g.add_edge(u, v)
    return SocialGraph(g)


def zipf_sizes(total: int, count: int, alpha: float = 1.0) -> list[int]:
    """Split ``total`` into ``count`` parts proportional to 1/k^alpha (largest remainder)."""
    if count < 1:
        raise ValueError("need at least one group")
    w = [1.0 / k**alpha for k in range(1, count + 1)]
    s = math.fsum(w)
    exact = [total * x / s for x in w]
    sizes = [int(math.floor(e)) for e in exact]
    short = total - sum(sizes)
    for i in sorted(range(count), key=lambda i: (-(exact[i] - sizes[i]), i))[:short]:
        sizes[i] += 1
    return sizes


def _grow(
    g: nx.Graph, seed: int, size: int, claimed: set, restart: list[int] | None = None
) -> list[int] | None:
    """BFS from ``seed`` over unclaimed users; ``restart`` supplies fresh seeds when stuck."""
    group = [seed]
    seen = {seed}
    queue = collections.deque([seed])
    while len(group) < size:
        if not queue:
            nxt = next((u for u in restart or () if u not in seen and u not in claimed), None)
            if nxt is None:
                break
            seen.add(nxt)
            group.append(nxt)
            queue.append(nxt)
            continue
        u = queue.popleft()
        for v in sorted(g.adj[u]):
            if v in seen or v in claimed:
                continue
            seen.add(v)
            group.append(v)
            queue.append(v)
            if len(group) == size:
                break
    return group if len(group) == size else None


def label_population(
    sg: SocialGraph,
    group_count: int,
    genuine_fraction: float,
    rng: random.Random,
    zipf_alpha: float = 1.0,
    max_reseeds: int = DEFAULT_RESEEDS,
) -> SocialGraph:
    """Grow ``group_count`` genuine groups by breadth-first search; the rest are polluters.

    Groups are placed largest first.  A seed whose unclaimed component is
    too small is swapped for another random seed, up to ``max_reseeds``
    times per group.  When every remaining user must be placed, the search
    instead jumps to another unclaimed user whenever it runs out.
    """
    if not 0.0 <= genuine_fraction <= 1.0:
        raise ValueError("genuine fraction must lie in [0, 1]")
    users = sg.users
    n_genuine = round(genuine_fraction * len(users))
    count = min(group_count, n_genuine) if n_genuine else 0
    labels = {u: POLLUTER for u in users}
    claimed: set[int] = set()
    sizes = zipf_sizes(n_genuine, count, zipf_alpha) if count else []
    for gi, size in enumerate(sizes):
        free = [u for u in users if u not in claimed]
        if len(free) == sum(sizes[gi:]):
            # no slack left (every user is genuine): reseeding cannot help, so the
            # search hops to a random unclaimed user whenever it runs dry
            rng.shuffle(free)
            group = _grow(sg.graph, free[0], size, claimed, restart=free)
        else:
            group = None
            for _ in range(max_reseeds + 1):
                group = _grow(sg.graph, rng.choice(free), size, claimed)
                if group is not None:
                    break
        if group is None:
            raise LabelingError(
                f"could not grow group {gi} to {size} users after {max_reseeds} reseeds"
            )
        claimed.update(group)
        for u in group:
            labels[u] = gi
    return SocialGraph(sg.graph, labels)


def summary(sg: SocialGraph) -> dict:
    g = sg.graph
    degrees = [d for _, d in g.degree()]
    out = {
        "users": g.number_of_nodes(),
        "edges": g.number_of_edges(),
        "mean_degree": (sum(degrees) / len(degrees)) if degrees else 0.0,
        "max_degree": max(degrees, default=0),
        "isolated": sum(1 for d in degrees if d == 0),
    }
    if sg.labels:
        groups = sg.groups()
        out["genuine"] = sum(len(v) for v in groups.values())
        out["polluters"] = len(sg.polluters())
        out["group_sizes"] = sorted((len(v) for v in groups.values()), reverse=True)
    return out
