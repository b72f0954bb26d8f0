# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops for the built-in finite chains.

Each function loads the generator state from the Python stream object,
runs entirely in C, and stores the state back, so word consumption and
results are bit-identical to the pure-Python reference implementations
(the test suite asserts this).  Seeding and replay bookkeeping stay on
the Python side.
"""

from libc.stdint cimport int32_t, int64_t, uint64_t
from libc.string cimport memcpy, memset

import numpy as np

cdef extern from *:
    int __builtin_popcountll(unsigned long long)
    int __builtin_ctzll(unsigned long long)

DEF KIND_LAZY = 1
DEF KIND_SORT = 2
DEF KIND_ISING = 3


# ------------------------------------------------------------------
# xoshiro256** core, mirroring stream._XoshiroStream word for word.
# ------------------------------------------------------------------

cdef struct Rng:
    uint64_t s0, s1, s2, s3
    uint64_t pos


cdef inline uint64_t _rotl(uint64_t x, int k):
    return (x << k) | (x >> (64 - k))


cdef inline uint64_t rng_next(Rng* r):
    cdef uint64_t result = _rotl(r.s1 * 5ULL, 7) * 9ULL
    cdef uint64_t t = r.s1 << 17
    r.s2 ^= r.s0
    r.s3 ^= r.s1
    r.s1 ^= r.s2
    r.s0 ^= r.s3
    r.s2 ^= t
    r.s3 = _rotl(r.s3, 45)
    r.pos += 1
    return result


cdef inline double rng_u01(Rng* r):
    return <double>(rng_next(r) >> 11) * (1.0 / 9007199254740992.0)


cdef inline uint64_t rng_below(Rng* r, uint64_t n):
    # rem = 2^64 mod n; rejecting words below it removes modulo bias.
    cdef uint64_t rem = (<uint64_t>0 - n) % n
    cdef uint64_t w
    while True:
        w = rng_next(r)
        if w >= rem:
            return w % n


cdef void load_rng(object stream, Rng* r):
    r.s0 = stream._s0
    r.s1 = stream._s1
    r.s2 = stream._s2
    r.s3 = stream._s3
    r.pos = stream._position


cdef void store_rng(object stream, Rng* r):
    stream._s0 = r.s0
    stream._s1 = r.s1
    stream._s2 = r.s2
    stream._s3 = r.s3
    stream._position = r.pos


# ------------------------------------------------------------------
# Chain dispatch.
# ------------------------------------------------------------------

cdef struct Chain:
    int kind
    # lazy walk
    int64_t top
    # sort chain
    int n_maps
    int n_states
    const int32_t* tables
    # ising
    int n_sites
    const int32_t* nbr
    const double* pp


cdef struct CSet:
    # lazy: a = lo, b = hi; ising: a = lower mask, b = upper mask;
    # sort: a|b = 128-bit membership mask over ranks.
    uint64_t a
    uint64_t b


cdef inline void set_full(Chain* ch, CSet* s):
    cdef int i
    if ch.kind == KIND_LAZY:
        s.a = 0
        s.b = <uint64_t>ch.top
    elif ch.kind == KIND_SORT:
        s.a = 0
        s.b = 0
        for i in range(ch.n_states):
            if i < 64:
                s.a |= 1ULL << i
            else:
                s.b |= 1ULL << (i - 64)
    else:
        s.a = 0
        if ch.n_sites >= 64:
            s.b = <uint64_t>0 - 1
        else:
            s.b = (1ULL << ch.n_sites) - 1


cdef inline int is_single(Chain* ch, CSet* s):
    if ch.kind == KIND_SORT:
        return __builtin_popcountll(s.a) + __builtin_popcountll(s.b) == 1
    return s.a == s.b


cdef inline uint64_t extract(Chain* ch, CSet* s):
    if ch.kind == KIND_SORT:
        if s.a:
            return <uint64_t>__builtin_ctzll(s.a)
        return <uint64_t>(64 + __builtin_ctzll(s.b))
    return s.a


cdef inline int64_t _lazy_move(int64_t x, uint64_t r, int64_t top):
    if r == 2:
        return x - 1 if x > 0 else 0
    if r == 3:
        return x + 1 if x < top else top
    return x


cdef inline int _ising_field(const int32_t* row, uint64_t mask):
    cdef int h = 0
    cdef int j
    for j in range(1, row[0] + 1):
        h += 1 if (mask >> row[j]) & 1ULL else -1
    return h


cdef void apply_map(Chain* ch, Rng* rng, CSet* sset, uint64_t* state):
    """Draw one random map and apply it to the set and optional state."""
    cdef uint64_t r, m, w, na, nb, bit
    cdef int site, i, j, h
    cdef const int32_t* tbl
    cdef const int32_t* row
    cdef double u
    if ch.kind == KIND_LAZY:
        r = rng_below(rng, 4)
        if sset != NULL:
            sset.a = <uint64_t>_lazy_move(<int64_t>sset.a, r, ch.top)
            sset.b = <uint64_t>_lazy_move(<int64_t>sset.b, r, ch.top)
        if state != NULL:
            state[0] = <uint64_t>_lazy_move(<int64_t>state[0], r, ch.top)
    elif ch.kind == KIND_SORT:
        m = rng_below(rng, <uint64_t>ch.n_maps)
        tbl = ch.tables + <size_t>m * ch.n_states
        if sset != NULL:
            na = 0
            nb = 0
            w = sset.a
            while w:
                i = __builtin_ctzll(w)
                w &= w - 1
                j = tbl[i]
                if j < 64:
                    na |= 1ULL << j
                else:
                    nb |= 1ULL << (j - 64)
            w = sset.b
            while w:
                i = 64 + __builtin_ctzll(w)
                w &= w - 1
                j = tbl[i]
                if j < 64:
                    na |= 1ULL << j
                else:
                    nb |= 1ULL << (j - 64)
            sset.a = na
            sset.b = nb
        if state != NULL:
            state[0] = <uint64_t>tbl[state[0]]
    else:
        site = <int>rng_below(rng, <uint64_t>ch.n_sites)
        u = rng_u01(rng)
        row = ch.nbr + site * 5
        bit = 1ULL << site
        if sset != NULL:
            h = _ising_field(row, sset.a)
            if u < ch.pp[h + 4]:
                sset.a |= bit
            else:
                sset.a &= ~bit
            h = _ising_field(row, sset.b)
            if u < ch.pp[h + 4]:
                sset.b |= bit
            else:
                sset.b &= ~bit
        if state != NULL:
            h = _ising_field(row, state[0])
            if u < ch.pp[h + 4]:
                state[0] |= bit
            else:
                state[0] &= ~bit


# ------------------------------------------------------------------
# Composite-map procedures (mirrors engines._generic_*).
# ------------------------------------------------------------------

cdef int composite_impl(Chain* ch, Rng* rng, int variant, uint64_t* state,
                        int64_t map_cap, int64_t* out):
    cdef CSet s1, s2
    cdef int64_t iters = 0
    cdef int64_t count = 0
    cdef int64_t i
    if variant == 0:
        set_full(ch, &s1)
        set_full(ch, &s2)
        while not is_single(ch, &s2):
            if 2 * iters >= map_cap:
                return -1
            apply_map(ch, rng, &s1, state)
            apply_map(ch, rng, &s2, NULL)
            iters += 1
        out[0] = is_single(ch, &s1)
        out[1] = 2 * iters
        out[2] = 2 * iters
        out[3] = iters
    elif variant == 1:
        set_full(ch, &s1)
        while not is_single(ch, &s1):
            if count >= map_cap:
                return -1
            apply_map(ch, rng, &s1, NULL)
            count += 1
        set_full(ch, &s1)
        for i in range(count):
            apply_map(ch, rng, &s1, state)
        out[0] = is_single(ch, &s1)
        out[1] = 2 * count
        out[2] = 2 * count
        out[3] = count
    else:
        set_full(ch, &s1)
        apply_map(ch, rng, &s1, NULL)
        while not is_single(ch, &s1):
            if count >= map_cap:
                return -1
            apply_map(ch, rng, &s1, NULL)
            count += 1
        set_full(ch, &s1)
        apply_map(ch, rng, &s1, state)
        for i in range(count):
            apply_map(ch, rng, &s1, state)
        out[0] = is_single(ch, &s1)
        out[1] = 2 + 2 * count
        out[2] = 2 + 2 * count
        out[3] = 1 + count
    return 0


def composite(object stream, object spec, int variant, object state_in,
              long long map_cap):
    """Run one composite map; returns (state, coalesced, maps, set_updates,
    state_updates) with maps == -1 when the map cap was hit."""
    cdef const int32_t[:, ::1] ti32
    cdef const double[::1] tf64
    cdef Chain ch
    memset(&ch, 0, sizeof(Chain))
    ch.kind = spec.kind
    if ch.kind == KIND_LAZY:
        ch.top = spec.n0
    elif ch.kind == KIND_SORT:
        ti32 = spec.table_i32
        ch.n_maps = 2 * (<int>spec.n0 - 1)
        ch.n_states = spec.n1
        ch.tables = &ti32[0, 0]
    elif ch.kind == KIND_ISING:
        ti32 = spec.table_i32
        tf64 = spec.table_f64
        ch.n_sites = spec.n0
        ch.nbr = &ti32[0, 0]
        ch.pp = &tf64[0]
    else:
        raise ValueError(f"unknown kernel chain kind {ch.kind}")
    cdef Rng rng
    load_rng(stream, &rng)
    cdef uint64_t state = state_in
    cdef int64_t out[4]
    cdef int rc = composite_impl(&ch, &rng, variant, &state, map_cap, out)
    store_rng(stream, &rng)
    if rc < 0:
        return (0, False, -1, 0, 0)
    return (int(state), bool(out[0]), int(out[1]), int(out[2]), int(out[3]))


# ------------------------------------------------------------------
# Binary-backoff inner loop (mirrors engines._bb_sample_generic).
# ------------------------------------------------------------------

def bb_sample(object stream, object spec, long sample_index, long long t_cap):
    """One binary-backoff sample; returns (state, maps, depth) with
    maps == -1 when the depth cap was hit.  Reseeding at each power-of-two
    boundary goes through the stream's own set_seed, so replay accounting
    stays correct."""
    cdef const int32_t[:, ::1] ti32
    cdef const double[::1] tf64
    cdef Chain ch
    memset(&ch, 0, sizeof(Chain))
    ch.kind = spec.kind
    if ch.kind == KIND_LAZY:
        ch.top = spec.n0
    elif ch.kind == KIND_SORT:
        ti32 = spec.table_i32
        ch.n_maps = 2 * (<int>spec.n0 - 1)
        ch.n_states = spec.n1
        ch.tables = &ti32[0, 0]
    elif ch.kind == KIND_ISING:
        ti32 = spec.table_i32
        tf64 = spec.table_f64
        ch.n_sites = spec.n0
        ch.nbr = &ti32[0, 0]
        ch.pp = &tf64[0]
    else:
        raise ValueError(f"unknown kernel chain kind {ch.kind}")
    cdef Rng rng
    cdef CSet sset
    cdef int64_t maps = 0
    cdef long long t_depth = 1
    cdef long long seg, si
    cdef int level, m
    while True:
        set_full(&ch, &sset)
        m = 0
        while (1LL << (m + 1)) <= t_depth:
            m += 1
        # Depth t uses the seed for level ceil(log2(t)): level j covers
        # depths (2^(j-1), 2^j], i.e. 2^(j-1) maps, and level 0 covers
        # depth 1.  Later passes replay the same seeds at the same
        # offsets, so shared depths see identical maps.
        for level in range(m, 0, -1):
            stream.set_seed(sample_index, level)
            load_rng(stream, &rng)
            seg = 1LL << (level - 1)
            for si in range(seg):
                apply_map(&ch, &rng, &sset, NULL)
            store_rng(stream, &rng)
            maps += seg
        stream.set_seed(sample_index, 0)
        load_rng(stream, &rng)
        apply_map(&ch, &rng, &sset, NULL)
        store_rng(stream, &rng)
        maps += 1
        if is_single(&ch, &sset):
            return (int(extract(&ch, &sset)), int(maps), int(t_depth))
        t_depth <<= 1
        if t_depth > t_cap:
            return (0, -1, int(t_depth))


# ------------------------------------------------------------------
# Composed-map engine (mirrors core._composed_map_run, unbiased order).
# ------------------------------------------------------------------

cdef void _fresh_map(Chain* ch, Rng* rng, int32_t* fresh, int n):
    cdef uint64_t r, m, bit, mask
    cdef int x, site, h
    cdef const int32_t* tbl
    cdef const int32_t* row
    cdef double u
    if ch.kind == KIND_LAZY:
        r = rng_below(rng, 4)
        for x in range(n):
            fresh[x] = <int32_t>_lazy_move(x, r, ch.top)
    elif ch.kind == KIND_SORT:
        m = rng_below(rng, <uint64_t>ch.n_maps)
        tbl = ch.tables + <size_t>m * ch.n_states
        memcpy(fresh, tbl, n * sizeof(int32_t))
    else:
        site = <int>rng_below(rng, <uint64_t>ch.n_sites)
        u = rng_u01(rng)
        row = ch.nbr + site * 5
        bit = 1ULL << site
        for x in range(n):
            mask = <uint64_t>x
            h = _ising_field(row, mask)
            if u < ch.pp[h + 4]:
                fresh[x] = <int32_t>(mask | bit)
            else:
                fresh[x] = <int32_t>(mask & ~bit)


def citp(object stream, object spec, long long map_cap, long long state_cap):
    """Compose maps into the past until the image is a point; returns
    (state, maps), with maps == -1 when the map cap was hit and -2 when
    the state space is larger than state_cap."""
    cdef const int32_t[:, ::1] ti32
    cdef const double[::1] tf64
    cdef Chain ch
    memset(&ch, 0, sizeof(Chain))
    ch.kind = spec.kind
    if ch.kind == KIND_LAZY:
        ch.top = spec.n0
    elif ch.kind == KIND_SORT:
        ti32 = spec.table_i32
        ch.n_maps = 2 * (<int>spec.n0 - 1)
        ch.n_states = spec.n1
        ch.tables = &ti32[0, 0]
    elif ch.kind == KIND_ISING:
        ti32 = spec.table_i32
        tf64 = spec.table_f64
        ch.n_sites = spec.n0
        ch.nbr = &ti32[0, 0]
        ch.pp = &tf64[0]
    else:
        raise ValueError(f"unknown kernel chain kind {ch.kind}")
    cdef long long n
    if ch.kind == KIND_LAZY:
        n = ch.top + 1
    elif ch.kind == KIND_SORT:
        n = ch.n_states
    else:
        n = 1LL << ch.n_sites
    if n > state_cap:
        return (0, -2)
    composed_arr = np.arange(n, dtype=np.int32)
    fresh_arr = np.empty(n, dtype=np.int32)
    tmp_arr = np.empty(n, dtype=np.int32)
    cdef int32_t[::1] composed_v = composed_arr
    cdef int32_t[::1] fresh_v = fresh_arr
    cdef int32_t[::1] tmp_v = tmp_arr
    cdef int32_t* composed = &composed_v[0]
    cdef int32_t* fresh = &fresh_v[0]
    cdef int32_t* tmp = &tmp_v[0]
    cdef int32_t* swap
    cdef Rng rng
    load_rng(stream, &rng)
    cdef int64_t maps = 0
    cdef int nn = <int>n
    cdef int x
    cdef int all_eq
    while True:
        all_eq = 1
        for x in range(1, nn):
            if composed[x] != composed[0]:
                all_eq = 0
                break
        if all_eq:
            break
        if maps >= map_cap:
            store_rng(stream, &rng)
            return (0, -1)
        _fresh_map(&ch, &rng, fresh, nn)
        # New map acts earliest, so it composes on the right.
        for x in range(nn):
            tmp[x] = composed[fresh[x]]
        swap = composed
        composed = tmp
        tmp = swap
        maps += 1
    store_rng(stream, &rng)
    return (int(composed[0]), int(maps))


# ------------------------------------------------------------------
# Spatial birth-death kernel (mirrors strauss.birth_death_evolve).
# ------------------------------------------------------------------

from libc.math cimport floor as c_floor, log1p as c_log1p, pow as c_pow
from libc.stdlib cimport calloc, free, malloc, realloc
from libc.string cimport memmove


cdef struct SCell:
    double* xs
    double* ys
    int cnt
    int cap


cdef struct SGrid:
    double r
    double r2
    int ncx
    int ncy
    SCell* cells


cdef int sgrid_init(SGrid* g, double r, double width, double height):
    g.r = r
    g.r2 = r * r
    g.ncx = <int>c_floor(width / r) + 1
    g.ncy = <int>c_floor(height / r) + 1
    g.cells = <SCell*>calloc(<size_t>g.ncx * g.ncy, sizeof(SCell))
    return 0 if g.cells != NULL else -1


cdef void sgrid_clear(SGrid* g):
    cdef long i
    if g.cells == NULL:
        return
    for i in range(<long>g.ncx * g.ncy):
        free(g.cells[i].xs)
        free(g.cells[i].ys)
    free(g.cells)
    g.cells = NULL


cdef inline long _cell_of(SGrid* g, double x, double y):
    cdef int cx = <int>c_floor(x / g.r)
    cdef int cy = <int>c_floor(y / g.r)
    if cx < 0 or cx >= g.ncx or cy < 0 or cy >= g.ncy:
        return -1
    return <long>cx * g.ncy + cy


cdef int sgrid_add(SGrid* g, double x, double y):
    cdef long ix = _cell_of(g, x, y)
    if ix < 0:
        return -1
    cdef SCell* c = &g.cells[ix]
    cdef int ncap
    cdef double* nx
    cdef double* ny
    if c.cnt == c.cap:
        ncap = 8 if c.cap == 0 else c.cap * 2
        nx = <double*>realloc(c.xs, ncap * sizeof(double))
        if nx == NULL:
            return -1
        c.xs = nx
        ny = <double*>realloc(c.ys, ncap * sizeof(double))
        if ny == NULL:
            return -1
        c.ys = ny
        c.cap = ncap
    c.xs[c.cnt] = x
    c.ys[c.cnt] = y
    c.cnt += 1
    return 0


cdef void sgrid_remove(SGrid* g, double x, double y):
    # Exact float match; duplicates cannot occur in continuous samples,
    # so order inside a cell never matters.
    cdef long ix = _cell_of(g, x, y)
    cdef SCell* c
    cdef int i
    if ix < 0:
        return
    c = &g.cells[ix]
    for i in range(c.cnt):
        if c.xs[i] == x and c.ys[i] == y:
            c.cnt -= 1
            c.xs[i] = c.xs[c.cnt]
            c.ys[i] = c.ys[c.cnt]
            return


cdef int sgrid_count_near(SGrid* g, double x, double y):
    cdef int cx = <int>c_floor(x / g.r)
    cdef int cy = <int>c_floor(y / g.r)
    cdef int gx, gy, i, total = 0
    cdef double dx, dy
    cdef SCell* c
    for gx in range(cx - 1, cx + 2):
        if gx < 0 or gx >= g.ncx:
            continue
        for gy in range(cy - 1, cy + 2):
            if gy < 0 or gy >= g.ncy:
                continue
            c = &g.cells[<long>gx * g.ncy + gy]
            for i in range(c.cnt):
                dx = x - c.xs[i]
                dy = y - c.ys[i]
                if dx * dx + dy * dy < g.r2:
                    total += 1
    return total


cdef struct SPool:
    double* xs
    double* ys
    signed char* tier
    signed char* intau
    int cnt
    int cap
    int n_delta


cdef int spool_insert(SPool* p, SGrid* gd, SGrid* ge, double x, double y,
                      int tier, int intau):
    cdef int ncap
    cdef void* np_
    if p.cnt == p.cap:
        ncap = 64 if p.cap == 0 else p.cap * 2
        np_ = realloc(p.xs, ncap * sizeof(double))
        if np_ == NULL:
            return -1
        p.xs = <double*>np_
        np_ = realloc(p.ys, ncap * sizeof(double))
        if np_ == NULL:
            return -1
        p.ys = <double*>np_
        np_ = realloc(p.tier, ncap)
        if np_ == NULL:
            return -1
        p.tier = <signed char*>np_
        np_ = realloc(p.intau, ncap)
        if np_ == NULL:
            return -1
        p.intau = <signed char*>np_
        p.cap = ncap
    p.xs[p.cnt] = x
    p.ys[p.cnt] = y
    p.tier[p.cnt] = <signed char>tier
    p.intau[p.cnt] = <signed char>intau
    p.cnt += 1
    if tier == 0:
        p.n_delta += 1
        return sgrid_add(gd, x, y)
    return sgrid_add(ge, x, y)


cdef void spool_remove_at(SPool* p, SGrid* gd, SGrid* ge, int ix,
                          double* rx, double* ry, int* rtier, int* rintau):
    # Swap-with-last, matching the pure pool so victim indices line up.
    rx[0] = p.xs[ix]
    ry[0] = p.ys[ix]
    rtier[0] = p.tier[ix]
    rintau[0] = p.intau[ix]
    p.cnt -= 1
    p.xs[ix] = p.xs[p.cnt]
    p.ys[ix] = p.ys[p.cnt]
    p.tier[ix] = p.tier[p.cnt]
    p.intau[ix] = p.intau[p.cnt]
    if rtier[0] == 0:
        p.n_delta -= 1
        sgrid_remove(gd, rx[0], ry[0])
    else:
        sgrid_remove(ge, rx[0], ry[0])


cdef inline int _s_birth_tier(SGrid* gd, SGrid* ge, double g, double K,
                              double x, double y, double u_acc,
                              int unknowns_alive):
    """Tier for an accepted-or-maybe birth: 0 delta, 1 ell, -1 rejected."""
    cdef int t_ell = sgrid_count_near(ge, x, y)
    cdef double p_hi = c_pow(g, <double>t_ell) / K
    cdef int t_both
    cdef double p_lo
    if unknowns_alive:
        return 0 if u_acc < p_hi else -1
    t_both = t_ell + sgrid_count_near(gd, x, y)
    p_lo = c_pow(g, <double>t_both) / K
    if u_acc < p_lo:
        return 1
    if u_acc < p_hi:
        return 0
    return -1


def strauss_evolve(object stream, double lam_births, double g, double K,
                   double width, double height, double r, long long k_in,
                   list init_pts, double duration, object tau_pts,
                   long long event_cap):
    """Run the coupled birth-death loop in C; duration < 0 means
    until-coalescent.  Mirrors the pure loop word for word.  Returns
    (rc, t, t1, events, k_final, physical, tau_remnant) where rc is 0
    for a normal finish, 1 for the event cap, and 2 for a tracked state
    escaping its bound; t1 < 0 encodes "never"."""
    cdef SGrid gd, ge, gt
    cdef SPool pool
    cdef Rng rng
    gd.cells = NULL
    ge.cells = NULL
    gt.cells = NULL
    pool.xs = NULL
    pool.ys = NULL
    pool.tier = NULL
    pool.intau = NULL
    pool.cnt = 0
    pool.cap = 0
    pool.n_delta = 0
    if sgrid_init(&gd, r, width, height) < 0 or \
            sgrid_init(&ge, r, width, height) < 0 or \
            sgrid_init(&gt, r, width, height) < 0:
        sgrid_clear(&gd)
        sgrid_clear(&ge)
        sgrid_clear(&gt)
        raise MemoryError()

    cdef long long k = k_in
    cdef int track = tau_pts is not None
    cdef int tau_cnt = 0
    cdef double* tau_x = NULL
    cdef double* tau_y = NULL
    cdef int fail = 0
    cdef double x, y
    cdef int tier_i
    for item in init_pts:
        x = item[0]
        y = item[1]
        tier_i = item[2]
        if spool_insert(&pool, &gd, &ge, x, y, tier_i, 0) < 0:
            fail = 1
            break
    if not fail and track:
        tau_cnt = len(tau_pts)
        if tau_cnt > 0:
            tau_x = <double*>malloc(tau_cnt * sizeof(double))
            tau_y = <double*>malloc(tau_cnt * sizeof(double))
            if tau_x == NULL or tau_y == NULL:
                fail = 1
        for i_py in range(tau_cnt):
            if fail:
                break
            x = tau_pts[i_py][0]
            y = tau_pts[i_py][1]
            tau_x[i_py] = x
            tau_y[i_py] = y
            if sgrid_add(&gt, x, y) < 0:
                fail = 1
    if fail:
        sgrid_clear(&gd)
        sgrid_clear(&ge)
        sgrid_clear(&gt)
        free(pool.xs)
        free(pool.ys)
        free(pool.tier)
        free(pool.intau)
        free(tau_x)
        free(tau_y)
        raise MemoryError()

    load_rng(stream, &rng)
    cdef int rc = 0
    cdef double t = 0.0
    cdef double t1 = 0.0 if k == 0 else -1.0
    cdef long long events = 0
    cdef int unknowns_alive
    cdef double u, rate, dt, t_next, u_type, u_acc
    cdef double cut_birth, cut_unknown
    cdef int tier, tau_birth, kill_ix, r_tier, r_intau
    cdef double rx, ry
    cdef long long victim

    if duration < 0.0:
        # Until coalescent: unknowns emit no events, only the time the
        # last one dies (max of k unit exponentials in one word).
        if k > 0:
            u = rng_u01(&rng)
            t1 = -c_log1p(-c_pow(u, 1.0 / <double>k))
        unknowns_alive = 1 if (k > 0 and t1 > 0.0) else 0
        if unknowns_alive or pool.n_delta > 0:
            while True:
                if events >= event_cap:
                    rc = 1
                    break
                rate = lam_births + <double>pool.cnt
                dt = -c_log1p(-rng_u01(&rng)) / rate
                t_next = t + dt
                if unknowns_alive and t_next >= t1:
                    unknowns_alive = 0
                    if pool.n_delta == 0:
                        t = t1
                        break
                t = t_next
                events += 1
                u_type = rng_u01(&rng)
                if u_type < lam_births / rate:
                    x = rng_u01(&rng) * width
                    y = rng_u01(&rng) * height
                    u_acc = rng_u01(&rng)
                    tier = _s_birth_tier(&gd, &ge, g, K, x, y, u_acc,
                                         unknowns_alive)
                    if tier >= 0:
                        if spool_insert(&pool, &gd, &ge, x, y, tier, 0) < 0:
                            rc = 3
                            break
                else:
                    kill_ix = <int>rng_below(&rng, <uint64_t>pool.cnt)
                    spool_remove_at(&pool, &gd, &ge, kill_ix,
                                    &rx, &ry, &r_tier, &r_intau)
                    if not unknowns_alive and pool.n_delta == 0:
                        break
        k = 0
    else:
        # Fixed duration: unknowns are real death units, so the event
        # stream never depends on the tracked input.
        while True:
            if events >= event_cap:
                rc = 1
                break
            rate = (lam_births + <double>k) + <double>pool.cnt
            dt = -c_log1p(-rng_u01(&rng)) / rate
            if t + dt > duration:
                t = duration
                break
            t = t + dt
            events += 1
            u_type = rng_u01(&rng)
            cut_birth = lam_births / rate
            cut_unknown = (lam_births + <double>k) / rate
            if u_type < cut_birth:
                x = rng_u01(&rng) * width
                y = rng_u01(&rng) * height
                u_acc = rng_u01(&rng)
                tier = _s_birth_tier(&gd, &ge, g, K, x, y, u_acc,
                                     1 if k > 0 else 0)
                tau_birth = 0
                if track:
                    tau_birth = 1 if u_acc < c_pow(
                        g, <double>sgrid_count_near(&gt, x, y)) / K else 0
                if tier >= 0:
                    if spool_insert(&pool, &gd, &ge, x, y, tier,
                                    tau_birth) < 0:
                        rc = 3
                        break
                    if tau_birth:
                        if sgrid_add(&gt, x, y) < 0:
                            rc = 3
                            break
                elif tau_birth:
                    rc = 2
                    break
            elif u_type < cut_unknown:
                victim = <long long>rng_below(&rng, <uint64_t>k)
                if track and victim < tau_cnt:
                    sgrid_remove(&gt, tau_x[victim], tau_y[victim])
                    tau_cnt -= 1
                    if victim < tau_cnt:
                        memmove(&tau_x[victim], &tau_x[victim + 1],
                                (tau_cnt - victim) * sizeof(double))
                        memmove(&tau_y[victim], &tau_y[victim + 1],
                                (tau_cnt - victim) * sizeof(double))
                k -= 1
                if k == 0:
                    t1 = t
            else:
                kill_ix = <int>rng_below(&rng, <uint64_t>pool.cnt)
                spool_remove_at(&pool, &gd, &ge, kill_ix,
                                &rx, &ry, &r_tier, &r_intau)
                if r_intau:
                    sgrid_remove(&gt, rx, ry)

    store_rng(stream, &rng)
    physical = []
    tau_rem = []
    cdef int i
    if rc == 0 or rc == 1:
        for i in range(pool.cnt):
            physical.append((pool.xs[i], pool.ys[i], int(pool.tier[i]),
                             bool(pool.intau[i])))
        for i in range(tau_cnt):
            tau_rem.append((tau_x[i], tau_y[i]))
    sgrid_clear(&gd)
    sgrid_clear(&ge)
    sgrid_clear(&gt)
    free(pool.xs)
    free(pool.ys)
    free(pool.tier)
    free(pool.intau)
    free(tau_x)
    free(tau_y)
    if rc == 3:
        raise MemoryError()
    return (rc, t, t1, events, int(k), physical, tau_rem)
