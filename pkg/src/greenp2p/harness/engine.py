"""Compiled query-cycle kernel.

The library modules are the reference protocol; this module runs the same
pipeline over dense arrays so that a desk-scale experiment (a million query
cycles) takes seconds.  Most arrays are laid out ``[version, user]``:

  L     local votes (int8, 0 = not voted)
  E     sign of the extended history, sign(L + gamma * FS)
  FS    friends' vote sum as of the last friend-db refresh
  QS/QC vote sum / vote count of the friends eligible for quick estimation;
        these two are ``[user, version]`` since a requestor reads a run of
        adjacent versions (one file's) in a single query
  prov  provider lists (prov_n entries per version), holder = membership
  vot   voter lists (vot_n entries per version)
  cmask tampered-block bitmask of each provider's copy (identifier corruption)

``S[x, o]`` holds the co-vote counts (n, x positive, o positive, both
positive) between x's extended history and o's local history, kept current
on every vote so that a correlation weight is an O(1) lookup.

Random draws come from a splitmix64 stream restarted from (root seed, cycle
index) at the start of every cycle, so a cycle's draws do not depend on how
the run is chunked.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# integer parameter slots
P_USE_REP, P_SOCIAL, P_VERIFY, P_VMIN, P_B, P_SOURCES, P_CAP, P_MINF = range(8)
P_IDENT, P_PLACEMENT, P_R, P_TRICKY, P_ROOT = range(8, 13)
N_IPARAMS = 13
# float parameter slots
F_GAMMA, F_PO, F_PD, F_NOISE, F_RATE, F_Q = range(6)
N_FPARAMS = 6

PLACEMENT_CODES = {"all": 0, "random-r": 1, "fixed-r": 2}

COUNTERS = (
    "genuine_queries",
    "polluter_queries",
    "authentic_accepted",
    "polluted_accepted",
    "detected",
    "failed_queries",
    "attempts",
    "rep_evaluations",
    "quick_estimates",
    "corrupted_attempts",
    "corrupted_attempts_ge_r",
    "corrupted_accepted",
    "corrupted_accepted_ge_r",
    "votes",
    "shares",
    "maintainer_failures",
    "no_candidate_queries",
)
C = {name: i for i, name in enumerate(COUNTERS)}
N_COUNTERS = len(COUNTERS)

EVENT_FIELDS = (
    "cycle",
    "requestor",
    "file",
    "polluter",
    "outcome",
    "attempts",
    "authentic",
    "polluted",
    "detected",
    "last_version",
)
N_EVENT = len(EVENT_FIELDS)
OUT_AUTHENTIC, OUT_NO_CANDIDATE, OUT_EXHAUSTED, OUT_MAINTAINER, OUT_POLLUTER = range(5)

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
INV53 = 1.0 / 9007199254740992.0


@njit(cache=True, inline="always")
def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def seed_cycle(rs, root, cycle):
    """Start the stream for one query cycle: a function of (root, cycle) only."""
    rs[0] = _mix(_mix(np.uint64(root)) + GOLDEN * np.uint64(cycle + 1))


@njit(cache=True, inline="always")
def _rand(rs):
    # splitmix64: uniform double in [0, 1)
    rs[0] += GOLDEN
    return (_mix(rs[0]) >> np.uint64(11)) * INV53


@njit(cache=True, inline="always")
def _randint(rs, n):
    k = int(_rand(rs) * n)
    return k if k < n else n - 1


@njit(cache=True)
def theta_from_counts(n, na, nb, nboth):
    if n <= 0:
        return 0.0
    a = na / n
    b = nb / n
    p = nboth / n
    d = a * (1.0 - a) * b * (1.0 - b)
    if d <= 0.0:
        return 0.0
    t = (p - a * b) / np.sqrt(d)
    if t > 1.0:
        t = 1.0
    elif t < -1.0:
        t = -1.0
    if abs(t) < 0.5:
        return 0.0
    return t


@njit(cache=True)
def _s_add(S, x, o, e, l, sign):
    S[x, o, 0] += sign
    if e > 0:
        S[x, o, 1] += sign
    if l > 0:
        S[x, o, 2] += sign
    if e > 0 and l > 0:
        S[x, o, 3] += sign


@njit(cache=True)
def _ext_sign(l, fs, gamma, social):
    if not social:
        return l
    val = l + gamma * fs
    if val > 1e-12:
        return 1
    if val < -1e-12:
        return -1
    return 0


@njit(cache=True)
def cast_vote(v, o_user, vote, L, E, FS, S, vot, vot_n, is_pol, ip, fp, counters):
    old = L[v, o_user]
    if old == vote:
        return
    L[v, o_user] = vote
    counters[13] += 1
    if old == 0:
        vot[v, vot_n[v]] = o_user
        vot_n[v] += 1
    if ip[P_USE_REP] == 0:
        return
    U = L.shape[1]
    for x in range(U):
        if x == o_user or is_pol[x]:
            continue
        e = E[v, x]
        if e == 0:
            continue
        if old != 0:
            _s_add(S, x, o_user, e, old, -1)
        _s_add(S, x, o_user, e, vote, 1)
    if is_pol[o_user]:
        E[v, o_user] = vote
        return
    fs = FS[v, o_user] if ip[P_SOCIAL] != 0 else 0
    enew = _ext_sign(vote, fs, fp[F_GAMMA], ip[P_SOCIAL] != 0)
    eold = E[v, o_user]
    if enew == eold:
        return
    E[v, o_user] = enew
    for j in range(vot_n[v]):
        y = vot[v, j]
        if y == o_user:
            continue
        l = L[v, y]
        if eold != 0:
            _s_add(S, o_user, y, eold, l, -1)
        if enew != 0:
            _s_add(S, o_user, y, enew, l, 1)


@njit(cache=True)
def _share(u, v, mask, prov, prov_n, holder, cmask, ident, counters):
    if holder[v, u]:
        return
    holder[v, u] = True
    prov[v, prov_n[v]] = u
    prov_n[v] += 1
    if ident:
        cmask[v, u] = mask
    counters[14] += 1


@njit(cache=True)
def _floyd(rs, n, k, out, stamp, tag):
    # k distinct indices from range(n), Floyd's algorithm; stamp marks picks
    for j in range(n - k, n):
        t = _randint(rs, j + 1)
        if stamp[t] == tag:
            t = j
        stamp[t] = tag
        out[j - (n - k)] = t


@njit(cache=True)
def _theta(u, o, S, tcache, tstamp, tag):
    if tstamp[o] == tag:
        return tcache[o]
    t = theta_from_counts(S[u, o, 0], S[u, o, 1], S[u, o, 2], S[u, o, 3])
    tcache[o] = t
    tstamp[o] = tag
    return t


@njit(cache=True)
def reputation(rs, u, v, L, S, QS, QC, vot, vot_n, vcomp, ip, fp, tcache, tstamp, tag, counters):
    if ip[P_SOCIAL] != 0:
        qc = QC[u, v]
        if qc > 0 and qc >= ip[P_MINF]:
            s = fp[F_GAMMA] * QS[u, v] / qc
            if abs(s) >= 0.5:
                counters[8] += 1
                return s
    counters[7] += 1
    n = vot_n[v]
    k = min(n, ip[P_CAP])
    num = 0.0
    den = 0.0
    rate = fp[F_RATE]
    for j in range(k):
        if n > k:
            # partial Fisher-Yates in place: the voter list is a set, order is free
            w = j + _randint(rs, n - j)
            vot[v, j], vot[v, w] = vot[v, w], vot[v, j]
        o = vot[v, j]
        if o == u:
            continue
        if rate > 0.0 and vcomp[o] and _rand(rs) < rate:
            continue
        t = _theta(u, o, S, tcache, tstamp, tag)
        if t != 0.0:
            num += L[v, o] * t
            den += abs(t)
    if den == 0.0:
        return 0.0
    r = num / den
    if r > 1.0:
        return 1.0
    if r < -1.0:
        return -1.0
    return r


@njit(cache=True)
def _pick(rs, weights, live, nc):
    tot = 0.0
    nlive = 0
    for k in range(nc):
        if live[k]:
            tot += weights[k]
            nlive += 1
    if nlive == 0:
        return -1
    if tot <= 0.0:
        t = _randint(rs, nlive)
        for k in range(nc):
            if live[k]:
                if t == 0:
                    return k
                t -= 1
    x = _rand(rs) * tot
    acc = 0.0
    last = -1
    for k in range(nc):
        if live[k] and weights[k] > 0.0:
            acc += weights[k]
            last = k
            if x < acc:
                return k
    return last


@njit(cache=True)
def _corruption_mask(rs, b, r, placement):
    if placement == 0:
        return (np.uint64(1) << np.uint64(b)) - np.uint64(1) if b < 64 else ~np.uint64(0)
    m = np.uint64(0)
    if placement == 2:
        for i in range(b - r, b):
            m |= np.uint64(1) << np.uint64(i)
        return m
    chosen = 0
    while chosen < r:
        i = _randint(rs, b)
        bit = np.uint64(1) << np.uint64(i)
        if (m & bit) == 0:
            m |= bit
            chosen += 1
    return m


@njit(cache=True)
def _received_mask(rs, v, prov, prov_n, cmask, ip, src, stamp, tags):
    # draw up to P_SOURCES distinct providers in random order; block i from src[i % k]
    n = prov_n[v]
    k = min(ip[P_SOURCES], n)
    tags[0] += 1
    _floyd(rs, n, k, src, stamp, tags[0])
    for i in range(k - 1, 0, -1):
        j = _randint(rs, i + 1)
        src[i], src[j] = src[j], src[i]
    b = ip[P_B]
    m = np.uint64(0)
    for i in range(b):
        p = prov[v, src[i % k]]
        bit = np.uint64(1) << np.uint64(i)
        if cmask[v, p] & bit:
            m |= bit
    return m


@njit(cache=True)
def _popcount(x):
    c = 0
    while x:
        x &= x - np.uint64(1)
        c += 1
    return c


@njit(cache=True)
def _detects(rs, mask, b, vmin, stamp, scratch, tags):
    if mask == 0 or vmin == 0:
        return False
    tags[0] += 1
    _floyd(rs, b, vmin, scratch, stamp, tags[0])
    for j in range(vmin):
        if mask & (np.uint64(1) << np.uint64(scratch[j])):
            return True
    return False


@njit(cache=True)
def run_cycles(
    c0, c1, ip, fp,
    is_pol, file_cdf, fv, fvn, decoy, fcomp, vcomp,
    L, E, FS, QS, QC, S,
    prov, prov_n, holder, vot, vot_n, cmask,
    counters, events,
):
    U = L.shape[1]
    kmax = fv.shape[1]
    weights = np.zeros(kmax)
    reps = np.zeros(kmax)
    live = np.zeros(kmax, np.bool_)
    rejected = np.zeros(kmax, np.bool_)
    scratch = np.zeros(max(U, 64), np.int64)
    src = np.zeros(max(U, 64), np.int64)
    stamp = np.zeros(max(U, 64), np.int64)
    tcache = np.zeros(U)
    tstamp = np.zeros(U, np.int64)
    tags = np.zeros(2, np.int64)
    rs = np.zeros(1, np.uint64)
    ident = ip[P_IDENT] != 0
    b = ip[P_B]
    r = ip[P_R]
    nf = file_cdf.shape[0]
    for c in range(c0, c1):
        seed_cycle(rs, ip[P_ROOT], c)
        ev = events[c - c0]
        u = _randint(rs, U)
        x = _rand(rs)
        f = np.searchsorted(file_cdf, x, side="right")
        if f >= nf:
            f = nf - 1
        nc = fvn[f]
        ev[0] = c
        ev[1] = u
        ev[2] = f
        ev[3] = 1 if is_pol[u] else 0
        ev[9] = -1
        if is_pol[u]:
            counters[1] += 1
        else:
            counters[0] += 1
        if fp[F_RATE] > 0.0 and fcomp[f] and _rand(rs) < fp[F_RATE]:
            counters[15] += 1
            if not is_pol[u]:
                counters[5] += 1
            ev[4] = OUT_MAINTAINER
            continue
        for k in range(nc):
            rejected[k] = False

        if is_pol[u]:
            for k in range(nc):
                v = fv[f, k]
                live[k] = prov_n[v] > 0
                weights[k] = prov_n[v]
            k = _pick(rs, weights, live, nc)
            if k < 0:
                ev[4] = OUT_NO_CANDIDATE
                continue
            v = fv[f, k]
            ev[9] = v
            if ident:
                got = _received_mask(rs, v, prov, prov_n, cmask, ip, src, stamp, tags)
                polluted = got != 0
            else:
                polluted = decoy[v]
            honest_vote = -1 if polluted else 1
            vote = -honest_vote
            if ip[P_TRICKY] != 0 and _rand(rs) < fp[F_Q]:
                vote = honest_vote
            cast_vote(v, u, vote, L, E, FS, S, vot, vot_n, is_pol, ip, fp, counters)
            mask = np.uint64(0)
            if ident:
                mask = _corruption_mask(rs, b, r, ip[P_PLACEMENT])
            _share(u, v, mask, prov, prov_n, holder, cmask, ident, counters)
            ev[4] = OUT_POLLUTER
            continue

        # genuine requestor
        tags[1] += 1  # fresh correlation cache for this requestor
        attempts = 0
        n_auth = 0
        n_poll = 0
        n_det = 0
        any_candidate = False
        fresh = True  # reps are reused across attempts until u's own history changes
        while True:
            for k in range(nc):
                v = fv[f, k]
                live[k] = (not rejected[k]) and prov_n[v] > 0
                if not live[k]:
                    weights[k] = 0.0
                    continue
                any_candidate = True
                if fresh:
                    reps[k] = 0.0
                    if ip[P_USE_REP] != 0:
                        reps[k] = reputation(rs, u, v, L, S, QS, QC, vot, vot_n, vcomp, ip, fp,
                                             tcache, tstamp, tags[1], counters)
                weights[k] = prov_n[v] * (reps[k] + 1.0)
            fresh = False
            k = _pick(rs, weights, live, nc)
            if k < 0:
                break
            v = fv[f, k]
            ev[9] = v
            attempts += 1
            counters[6] += 1
            got = np.uint64(0)
            if ident:
                got = _received_mask(rs, v, prov, prov_n, cmask, ip, src, stamp, tags)
                pc = _popcount(got)
                if pc > 0:
                    counters[9] += 1
                    if pc >= r:
                        counters[10] += 1
            if ip[P_VERIFY] != 0 and _detects(rs, got, b, ip[P_VMIN], stamp, scratch, tags):
                counters[4] += 1
                n_det += 1
                rejected[k] = True
                continue
            if ident and got != 0:
                counters[11] += 1
                if _popcount(got) >= r:
                    counters[12] += 1
            polluted = decoy[v] or got != 0
            if not polluted:
                counters[2] += 1
                n_auth += 1
                if _rand(rs) < fp[F_PO]:
                    vote = 1
                    if _rand(rs) < fp[F_NOISE]:
                        vote = -1
                    cast_vote(v, u, vote, L, E, FS, S, vot, vot_n, is_pol, ip, fp, counters)
                _share(u, v, got, prov, prov_n, holder, cmask, ident, counters)
                break
            counters[3] += 1
            n_poll += 1
            if _rand(rs) < fp[F_PO]:
                vote = -1
                if _rand(rs) < fp[F_NOISE]:
                    vote = 1
                cast_vote(v, u, vote, L, E, FS, S, vot, vot_n, is_pol, ip, fp, counters)
                tags[1] += 1  # own history changed: drop cached weights and reps
                fresh = True
            if _rand(rs) >= fp[F_PD]:
                _share(u, v, got, prov, prov_n, holder, cmask, ident, counters)
            rejected[k] = True
        ev[5] = attempts
        ev[6] = n_auth
        ev[7] = n_poll
        ev[8] = n_det
        if n_auth > 0:
            ev[4] = OUT_AUTHENTIC
        else:
            counters[5] += 1
            if not any_candidate:
                counters[16] += 1
                ev[4] = OUT_NO_CANDIDATE
            else:
                ev[4] = OUT_EXHAUSTED


@njit(cache=True)
def apply_extension_change(Enew, E, L, S, vot, vot_n, is_pol):
    """Bring S in line with a refreshed extended history, entry by entry."""
    V, U = E.shape
    changed = 0
    for v in range(V):
        n = vot_n[v]
        for x in range(U):
            if is_pol[x]:
                continue
            eold = E[v, x]
            enew = Enew[v, x]
            if eold == enew:
                continue
            changed += 1
            E[v, x] = enew
            for j in range(n):
                y = vot[v, j]
                if y == x:
                    continue
                l = L[v, y]
                if eold != 0:
                    _s_add(S, x, y, eold, l, -1)
                if enew != 0:
                    _s_add(S, x, y, enew, l, 1)
    return changed


@njit(cache=True)
def eligible_friends(S, adj_ptr, adj_idx, is_pol, out):
    """out[k] = 1 when the k-th adjacency entry (x -> friend) has theta >= 0.5."""
    U = adj_ptr.shape[0] - 1
    for x in range(U):
        if is_pol[x]:
            continue
        for k in range(adj_ptr[x], adj_ptr[x + 1]):
            y = adj_idx[k]
            t = theta_from_counts(S[x, y, 0], S[x, y, 1], S[x, y, 2], S[x, y, 3])
            out[k] = 1 if t >= 0.5 else 0
