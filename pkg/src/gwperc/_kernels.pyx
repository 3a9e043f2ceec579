# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels; semantics are defined by ``_pykernels``."""

from libc.stdint cimport int32_t, int64_t, uint64_t
from libcpp.vector cimport vector

import numpy as np

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef uint64_t SALT_OFFSPRING = 0x6A09E667F3BCC908ULL
cdef uint64_t SALT_STREAM = 0x3C6EF372FE94F82BULL
cdef double INV_2_53 = 1.0 / 9007199254740992.0

cdef enum:
    MODE_UNIFORM = 0
    MODE_RELATIVE = 1
    MODE_TABLE = 2


cdef inline uint64_t mix64(uint64_t x) noexcept nogil:
    cdef uint64_t z = x + GOLDEN
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double unit(uint64_t h) noexcept nogil:
    return <double>(h >> 11) * INV_2_53


cdef inline int offspring(uint64_t key, const double[::1] cdf) noexcept nogil:
    cdef double u = unit(mix64(key ^ SALT_OFFSPRING))
    cdef int j = 0
    while cdf[j] <= u:
        j += 1
    return j


cdef inline double stream_unit(uint64_t key, uint64_t counter) noexcept nogil:
    return unit(mix64(key ^ mix64(SALT_STREAM + counter)))


cdef int64_t grow(uint64_t start, uint64_t pkey, int steps, const double[::1] cdf,
                  const uint64_t[::1] salts, double pc, int64_t cap,
                  vector[uint64_t]& cur, vector[uint64_t]& nxt, int64_t* reach) noexcept nogil:
    cdef int step, i, K
    cdef size_t t
    cdef uint64_t key, ck
    cur.clear()
    cur.push_back(start)
    for step in range(steps):
        nxt.clear()
        for t in range(cur.size()):
            key = cur[t]
            K = offspring(key, cdf)
            for i in range(K):
                ck = mix64(key ^ salts[i])
                if unit(mix64(pkey ^ ck)) < pc:
                    nxt.push_back(ck)
        if nxt.size() == 0:
            reach[0] = step
            return 0
        if <int64_t>nxt.size() > cap:
            reach[0] = step
            return -1
        cur.swap(nxt)
    reach[0] = steps
    return <int64_t>cur.size()


def cluster_sizes(const uint64_t[::1] root_keys, const uint64_t[::1] perc_keys,
                  const double[::1] cdf, const uint64_t[::1] salts, double pc, int n,
                  int64_t cap):
    cdef Py_ssize_t R = perc_keys.shape[0], r
    sizes = np.zeros(R, dtype=np.int64)
    reach = np.zeros(R, dtype=np.int64)
    cdef int64_t[::1] sv = sizes
    cdef int64_t[::1] rv = reach
    cdef vector[uint64_t] cur, nxt
    with nogil:
        for r in range(R):
            sv[r] = grow(root_keys[r], perc_keys[r], n, cdf, salts, pc, cap, cur, nxt, &rv[r])
    return sizes, reach


def cluster_detail(uint64_t root_key, uint64_t perc_key, const double[::1] cdf,
                   const uint64_t[::1] salts, double pc, int n, int m):
    cdef vector[uint64_t] cur, nxt
    cdef vector[int64_t] lab, nlab
    cdef int depth, i, K
    cdef size_t t
    cdef uint64_t key, ck
    cdef int64_t branches = 0, last = -1
    cur.push_back(root_key)
    lab.push_back(0)
    with nogil:
        for depth in range(n):
            nxt.clear()
            nlab.clear()
            for t in range(cur.size()):
                key = cur[t]
                K = offspring(key, cdf)
                for i in range(K):
                    ck = mix64(key ^ salts[i])
                    if unit(mix64(perc_key ^ ck)) < pc:
                        nxt.push_back(ck)
                        nlab.push_back(lab[t])
            cur.swap(nxt)
            lab.swap(nlab)
            if cur.size() == 0:
                break
            if depth + 1 == m:
                for t in range(lab.size()):
                    lab[t] = <int64_t>t
        # labels are non-decreasing in breadth-first order
        for t in range(lab.size()):
            if lab[t] != last:
                branches += 1
                last = lab[t]
    out = np.empty(cur.size(), dtype=np.uint64)
    cdef uint64_t[::1] ov = out
    for t in range(cur.size()):
        ov[t] = cur[t]
    return out, (branches if cur.size() else 0)


cdef int64_t count_below(uint64_t key, const double[::1] cdf, const uint64_t[::1] salts,
                         int depth, vector[uint64_t]& sk, vector[int]& sd) noexcept nogil:
    cdef int64_t total = 0
    cdef uint64_t k
    cdef int d, i, K
    sk.clear()
    sd.clear()
    sk.push_back(key)
    sd.push_back(0)
    while sk.size():
        k = sk.back()
        d = sd.back()
        sk.pop_back()
        sd.pop_back()
        if d == depth:
            total += 1
            continue
        K = offspring(k, cdf)
        for i in range(K):
            sk.push_back(mix64(k ^ salts[i]))
            sd.push_back(d + 1)
    return total


def descendant_count(uint64_t key, const double[::1] cdf, const uint64_t[::1] salts, int depth):
    cdef vector[uint64_t] sk
    cdef vector[int] sd
    cdef int64_t total
    with nogil:
        total = count_below(key, cdf, salts, depth, sk, sd)
    return total


cdef int64_t table_find(const uint64_t[::1] wkeys, uint64_t key) noexcept nogil:
    cdef int64_t lo = 0, hi = wkeys.shape[0], mid
    while lo < hi:
        mid = (lo + hi) // 2
        if wkeys[mid] < key:
            lo = mid + 1
        else:
            hi = mid
    if lo < wkeys.shape[0] and wkeys[lo] == key:
        return lo
    return -1


cdef int64_t grow_record(uint64_t start, int64_t parent_index, int depth, uint64_t pkey,
                         int steps, const double[::1] cdf, const uint64_t[::1] salts,
                         double pc, vector[uint64_t]& keys, vector[int32_t]& depths,
                         vector[int64_t]& parents) noexcept nogil:
    cdef vector[uint64_t] cur, nxt
    cdef vector[int64_t] cpar, npar
    cdef int step, i, K
    cdef size_t t
    cdef int64_t me
    cdef uint64_t key, ck
    cur.push_back(start)
    cpar.push_back(parent_index)
    for step in range(steps + 1):
        nxt.clear()
        npar.clear()
        for t in range(cur.size()):
            keys.push_back(cur[t])
            depths.push_back(depth + step)
            parents.push_back(cpar[t])
        if step == steps:
            return <int64_t>cur.size()
        me = <int64_t>keys.size() - <int64_t>cur.size()
        for t in range(cur.size()):
            key = cur[t]
            K = offspring(key, cdf)
            for i in range(K):
                ck = mix64(key ^ salts[i])
                if unit(mix64(pkey ^ ck)) < pc:
                    nxt.push_back(ck)
                    npar.push_back(me + <int64_t>t)
        if nxt.size() == 0:
            return 0
        cur.swap(nxt)
        cpar.swap(npar)
    return 0


def iic_run(const uint64_t[::1] root_keys, const uint64_t[::1] iic_keys, const double[::1] cdf,
            const uint64_t[::1] salts, double pc, int n, int m, int mode,
            const uint64_t[::1] wkeys, const double[::1] wvals, bint record, int64_t cap):
    cdef Py_ssize_t R = iic_keys.shape[0], r
    sizes = np.zeros(R, dtype=np.int64)
    spines = np.zeros((R if record else 0, n + 1), dtype=np.uint64)
    cdef int64_t[::1] sv = sizes
    cdef uint64_t[:, ::1] spv = spines
    cdef vector[uint64_t] keys, cur, nxt, sk, children
    cdef vector[int32_t] depths
    cdef vector[int64_t] parents, offsets
    cdef vector[int] sd
    cdef vector[double] weights
    cdef uint64_t ikey, u, ck
    cdef int64_t total, got, spine_index, pos, reach
    cdef int d, i, K, choice
    cdef double tot_w, target, acc
    cdef bint missing = False
    offsets.push_back(0)
    with nogil:
        for r in range(R):
            ikey = iic_keys[r]
            u = root_keys[r]
            total = 1
            spine_index = <int64_t>keys.size()
            if record:
                spv[r, 0] = u
                keys.push_back(u)
                depths.push_back(0)
                parents.push_back(-1)
            for d in range(n):
                K = offspring(u, cdf)
                children.clear()
                for i in range(K):
                    children.push_back(mix64(u ^ salts[i]))
                if K == 1:
                    choice = 0
                else:
                    weights.clear()
                    for i in range(K):
                        if mode == MODE_UNIFORM:
                            weights.push_back(1.0)
                        elif mode == MODE_RELATIVE:
                            weights.push_back(<double>count_below(children[i], cdf, salts, m, sk, sd))
                        else:
                            pos = table_find(wkeys, children[i])
                            if pos < 0:
                                missing = True
                                weights.push_back(0.0)
                            else:
                                weights.push_back(wvals[pos])
                    if missing:
                        break
                    tot_w = 0.0
                    for i in range(K):
                        tot_w += weights[i]
                    target = stream_unit(ikey, <uint64_t>d) * tot_w
                    acc = 0.0
                    choice = K - 1
                    for i in range(K):
                        acc += weights[i]
                        if acc > target:
                            choice = i
                            break
                for i in range(K):
                    ck = children[i]
                    if i == choice or not (unit(mix64(ikey ^ ck)) < pc):
                        continue
                    if record:
                        got = grow_record(ck, spine_index, d + 1, ikey, n - d - 1, cdf, salts,
                                          pc, keys, depths, parents)
                    else:
                        got = grow(ck, ikey, n - d - 1, cdf, salts, pc, cap, cur, nxt, &reach)
                        if got < 0:
                            total = -1
                            break
                    total += got
                if total < 0:
                    break
                u = children[choice]
                if record:
                    spv[r, d + 1] = u
                    keys.push_back(u)
                    depths.push_back(d + 1)
                    parents.push_back(spine_index)
                    spine_index = <int64_t>keys.size() - 1
            if missing:
                break
            sv[r] = total
            offsets.push_back(<int64_t>keys.size())
    if missing:
        raise KeyError("spine weight table is missing a child vertex")
    ok = np.empty(keys.size(), dtype=np.uint64)
    od = np.empty(keys.size(), dtype=np.int32)
    op = np.empty(keys.size(), dtype=np.int64)
    cdef uint64_t[::1] okv = ok
    cdef int32_t[::1] odv = od
    cdef int64_t[::1] opv = op
    cdef size_t t
    for t in range(keys.size()):
        okv[t] = keys[t]
        odv[t] = depths[t]
        opv[t] = parents[t]
    if record:
        off = np.array([offsets[t] for t in range(offsets.size())], dtype=np.int64)
    else:
        off = np.zeros(1, dtype=np.int64)
    return sizes, spines, ok, od, op, off
