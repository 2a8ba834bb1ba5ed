"""World construction: graph, labels, catalog, initial shares, array state."""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..adversary import seed_pollution
from ..content import Catalog, MaintainerStore, zipf_cdf, zipf_pick
from ..filtering import majority_threshold
from ..overlay import Ring, hash_to_id, maintainer_group
from ..reputation import vote_subject
from ..socialgraph import SocialGraph, label_population, load_trace, synth_graph
from ..verification import plan_verification
from . import engine
from .config import SimConfig, strategy


def stream(root: int, label: str) -> random.Random:
    """Independent labelled RNG stream derived from the root seed."""
    digest = hashlib.sha256(f"{root}:{label}".encode()).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


class ConfigError(ValueError):
    pass


@dataclass
class WorldState:
    config: SimConfig
    graph: SocialGraph
    node_ids: list[int]  # ring identifier of user index i
    catalog: Catalog
    store: MaintainerStore
    version_ids: list[bytes]  # version index -> id
    files: list[str]
    ip: np.ndarray
    fp: np.ndarray
    arrays: dict[str, np.ndarray]
    adjacency: sp.csr_matrix
    counters: np.ndarray = field(default_factory=lambda: np.zeros(engine.N_COUNTERS, np.int64))
    cycle: int = 0
    refreshes: int = 0
    extension_changes: int = 0

    @property
    def users(self) -> int:
        return len(self.node_ids)

    def user_index(self) -> dict[int, int]:
        return {n: i for i, n in enumerate(self.graph.users)}

    def counter(self, name: str) -> int:
        return int(self.counters[engine.C[name]])

    def is_polluter(self, i: int) -> bool:
        return bool(self.arrays["is_pol"][i])


def init_world(cfg: SimConfig) -> WorldState:
    strat = strategy(cfg.strategy)
    m = cfg.effective_m()
    sc = cfg.scenario()

    if cfg.trace:
        sg = load_trace(cfg.trace)
    else:
        sg = synth_graph(cfg.users, cfg.avg_degree, stream(cfg.seed, "graph"))
    try:
        sg = label_population(sg, cfg.group_count, 1.0 - cfg.beta, stream(cfg.seed, "labels"),
                              zipf_alpha=cfg.group_alpha)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    users = sg.users
    index = {u: i for i, u in enumerate(users)}
    U = len(users)
    node_ids = [hash_to_id(f"user-{u}") for u in users]
    ring = Ring(node_ids)

    catalog = Catalog.build(cfg.file_count, cfg.versions_per_file, cfg.blocks_per_version,
                            cfg.decoys_per_file if sc.kind == "decoy" else 0)
    store = MaintainerStore(ring, m)
    holdings: dict[int, set] = {}

    # genuine users' initial authentic shares: file, then version, both by Zipf rank
    rng = stream(cfg.seed, "shares")
    file_cdf = zipf_cdf(cfg.file_count, cfg.zipf_content)
    ver_cdf = zipf_cdf(cfg.versions_per_file, cfg.zipf_content)
    for u in sg.genuine():
        mine = holdings.setdefault(node_ids[index[u]], set())
        while len(mine) < cfg.authentic_shares_per_genuine:
            f = catalog.files[zipf_pick(file_cdf, rng)]
            vid = catalog.authentic[f][zipf_pick(ver_cdf, rng)]
            if (f, vid) in mine:
                continue
            mine.add((f, vid))
            store.publish(node_ids[index[u]], catalog.truth[vid], catalog.digests[vid])

    polluter_ids = [node_ids[index[u]] for u in sg.polluters()]
    seed_pollution(sc, polluter_ids, catalog, store, stream(cfg.seed, "pollution"),
                   r=cfg.verify_r, alpha=cfg.zipf_content, holdings=holdings)

    # dense state
    files = catalog.files
    vids: list[bytes] = []
    fv_lists = []
    for f in files:
        row = catalog.authentic[f] + catalog.decoys.get(f, [])
        fv_lists.append(list(range(len(vids), len(vids) + len(row))))
        vids.extend(row)
    V = len(vids)
    vindex = {vid: i for i, vid in enumerate(vids)}
    kmax = max(len(r) for r in fv_lists)
    fv = np.full((len(files), kmax), -1, np.int64)
    fvn = np.zeros(len(files), np.int64)
    for i, r in enumerate(fv_lists):
        fv[i, : len(r)] = r
        fvn[i] = len(r)

    uidx = {nid: i for i, nid in enumerate(node_ids)}
    ident = sc.kind == "identifier"
    prov = np.zeros((V, U), np.int32)
    prov_n = np.zeros(V, np.int64)
    holder = np.zeros((V, U), np.bool_)
    cmask = np.zeros((V, U) if ident else (1, 1), np.uint64)
    for f in files:
        for rec in store.honest_records(f):
            v = vindex[rec.version_id]
            truth = catalog.truth[rec.version_id]
            for pid in rec.provider_ids:
                i = uidx[pid]
                prov[v, prov_n[v]] = i
                prov_n[v] += 1
                holder[v, i] = True
                if ident:
                    bits = 0
                    for blk in truth.corrupted_blocks(pid):
                        bits |= 1 << blk
                    cmask[v, i] = bits

    is_pol = np.array([sg.is_polluter(u) for u in users], np.bool_)
    decoy = np.array([catalog.truth[vid].decoy for vid in vids], np.bool_)
    polluter_nodes = set(polluter_ids)
    t = majority_threshold(m)

    def compromised(subject: str) -> bool:
        g = maintainer_group(subject, m, ring)
        return sum(x in polluter_nodes for x in g.members) >= t

    if cfg.maintainer_corruption_rate > 0:
        fcomp = np.array([compromised(f) for f in files], np.bool_)
        vcomp = np.array([compromised(vote_subject(n)) for n in node_ids], np.bool_)
    else:
        fcomp = np.zeros(len(files), np.bool_)
        vcomp = np.zeros(U, np.bool_)

    rep = strat.reputation
    social = strat.social and rep
    arrays = {
        "is_pol": is_pol,
        "file_cdf": np.array(file_cdf, np.float64),
        "fv": fv,
        "fvn": fvn,
        "decoy": decoy,
        "fcomp": fcomp,
        "vcomp": vcomp,
        "L": np.zeros((V, U), np.int8),
        "E": np.zeros((V, U), np.int8),
        "FS": np.zeros((V, U) if social else (1, 1), np.int16),
        "QS": np.zeros((U, V) if social else (1, 1), np.int16),
        "QC": np.zeros((U, V) if social else (1, 1), np.int16),
        "S": np.zeros((U, U, 4) if rep else (1, 1, 4), np.int32),
        "prov": prov,
        "prov_n": prov_n,
        "holder": holder,
        "vot": np.zeros((V, U), np.int32),
        "vot_n": np.zeros(V, np.int64),
        "cmask": cmask,
    }

    plan = plan_verification(cfg.blocks_per_version, cfg.verify_r, cfg.efpr)
    ip = np.zeros(engine.N_IPARAMS, np.int64)
    ip[engine.P_USE_REP] = rep
    ip[engine.P_SOCIAL] = social
    ip[engine.P_VERIFY] = strat.verify
    ip[engine.P_VMIN] = plan.v_min
    ip[engine.P_B] = cfg.blocks_per_version
    ip[engine.P_SOURCES] = cfg.sources
    ip[engine.P_CAP] = cfg.voter_sample_cap
    ip[engine.P_MINF] = cfg.min_friend_votes
    ip[engine.P_IDENT] = ident
    ip[engine.P_PLACEMENT] = engine.PLACEMENT_CODES[cfg.placement]
    ip[engine.P_R] = cfg.verify_r
    ip[engine.P_TRICKY] = cfg.voting_strategy == "tricky"
    ip[engine.P_ROOT] = int.from_bytes(hashlib.sha256(f"{cfg.seed}:kernel".encode()).digest()[:4], "big")
    fp = np.zeros(engine.N_FPARAMS, np.float64)
    fp[engine.F_GAMMA] = cfg.gamma
    fp[engine.F_PO] = cfg.p_o
    fp[engine.F_PD] = cfg.p_d
    fp[engine.F_NOISE] = cfg.vote_noise
    fp[engine.F_RATE] = cfg.maintainer_corruption_rate
    fp[engine.F_Q] = cfg.tricky_q

    rows, cols = [], []
    for a, b in sg.graph.edges:
        rows += [index[a], index[b]]
        cols += [index[b], index[a]]
    adjacency = sp.csr_matrix((np.ones(len(rows), np.int32), (rows, cols)), shape=(U, U))
    adjacency.sort_indices()

    return WorldState(cfg, sg, node_ids, catalog, store, vids, files, ip, fp, arrays, adjacency)


def refresh_friend_dbs(world: WorldState) -> None:
    """Every user re-reads the friends' histories; extended histories and weights follow."""
    a = world.arrays
    world.refreshes += 1
    if not world.ip[engine.P_SOCIAL]:
        return
    L = a["L"]
    adj = world.adjacency
    lt = L.T.astype(np.int32)
    fs = np.ascontiguousarray((adj @ lt).T)
    a["FS"][:] = fs
    gamma = world.fp[engine.F_GAMMA]
    val = L + gamma * fs
    enew = np.sign(np.where(np.abs(val) > 1e-12, val, 0.0)).astype(np.int8)
    enew[:, a["is_pol"]] = L[:, a["is_pol"]]
    world.extension_changes += engine.apply_extension_change(
        enew, a["E"], L, a["S"], a["vot"], a["vot_n"], a["is_pol"]
    )
    flags = np.zeros(adj.nnz, np.int32)
    engine.eligible_friends(a["S"], adj.indptr.astype(np.int64), adj.indices.astype(np.int64),
                            a["is_pol"], flags)
    elig = sp.csr_matrix((flags, adj.indices.copy(), adj.indptr.copy()), shape=adj.shape)
    elig.eliminate_zeros()
    a["QS"][:] = elig @ lt
    a["QC"][:] = elig @ np.abs(lt)


def snapshot_hash(world: WorldState) -> str:
    """Digest of the full mutable state plus the counters."""
    h = hashlib.sha256()
    for name in sorted(world.arrays):
        arr = np.ascontiguousarray(world.arrays[name])
        h.update(name.encode())
        h.update(str(arr.shape).encode())
        h.update(arr.tobytes())
    h.update(world.counters.tobytes())
    h.update(str(world.cycle).encode())
    return h.hexdigest()
