# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. Signatures mirror :mod:`loca._pykernels` exactly.

Besides the kernels this module holds :func:`run_tabular_phase`, a compiled
copy of the protocol's training/evaluation loop for the tabular agents on
table-driven environments. It consumes the same random streams in the same
order as the Python loop and calls the same kernel code, so both produce
bit-identical curves and tables.
"""

from libc.math cimport fabs, floor, pow, INFINITY
from libc.string cimport memset

import numpy as np

DEF MODEL_FULL = 0
DEF MODEL_HIT = 1
DEF MODEL_APPEND = 2


cdef int _model_update(int[:, ::1] succ, double[:, ::1] prob, int[::1] nnz,
                       double[::1] rhat, Py_ssize_t row, int outcome, double reward,
                       double alpha) noexcept nogil:
    cdef Py_ssize_t k, n = nnz[row], hit = -1
    cdef double keep = 1.0 - alpha
    for k in range(n):
        if succ[row, k] == outcome:
            hit = k
    if hit < 0 and n >= succ.shape[1]:
        return MODEL_FULL
    for k in range(n):
        prob[row, k] *= keep
    rhat[row] = keep * rhat[row] + alpha * reward
    if hit >= 0:
        prob[row, hit] += alpha
        return MODEL_HIT
    succ[row, n] = outcome
    prob[row, n] = alpha
    nnz[row] = n + 1
    return MODEL_APPEND


def model_update(int[:, ::1] succ, double[:, ::1] prob, int[::1] nnz,
                 double[::1] rhat, Py_ssize_t row, int outcome, double reward,
                 double alpha):
    """EMA step of one model row; 0 = row full (nothing changed), 1 = hit, 2 = new successor."""
    return _model_update(succ, prob, nnz, rhat, row, outcome, reward, alpha)


cdef inline double _q(int[:, ::1] succ, double[:, ::1] prob, int[::1] nnz,
                      double[::1] rhat, double[::1] v, Py_ssize_t row,
                      double discount) noexcept nogil:
    cdef Py_ssize_t k, n = nnz[row]
    cdef const int* sp = &succ[row, 0]
    cdef const double* pp = &prob[row, 0]
    cdef const double* vp = &v[0]
    cdef double tot = 0.0
    for k in range(n):
        tot += pp[k] * vp[sp[k]]
    return rhat[row] + discount * tot


cdef inline double _backup(int[:, ::1] succ, double[:, ::1] prob, int[::1] nnz,
                           double[::1] rhat, double[::1] v, Py_ssize_t s,
                           Py_ssize_t n_actions, double gamma) noexcept nogil:
    cdef Py_ssize_t a
    cdef double q, best = -INFINITY
    for a in range(n_actions):
        q = _q(succ, prob, nnz, rhat, v, s * n_actions + a, gamma)
        if q > best:
            best = q
    return best


def q_values(int[:, ::1] succ, double[:, ::1] prob, int[::1] nnz,
             double[::1] rhat, double[::1] v, Py_ssize_t s, Py_ssize_t n_actions,
             double discount, double[::1] out):
    cdef Py_ssize_t a
    for a in range(n_actions):
        out[a] = _q(succ, prob, nnz, rhat, v, s * n_actions + a, discount)


def value_iteration(int[:, ::1] succ, double[:, ::1] prob, int[::1] nnz,
                    double[::1] rhat, double[::1] v, Py_ssize_t n_states,
                    Py_ssize_t n_actions, double gamma, double theta,
                    Py_ssize_t max_sweeps, double[::1] scratch):
    cdef Py_ssize_t sweep, s
    cdef double best, delta = INFINITY, d
    with nogil:
        for sweep in range(max_sweeps):
            delta = 0.0
            for s in range(n_states):
                best = _backup(succ, prob, nnz, rhat, v, s, n_actions, gamma)
                scratch[s] = best
                d = fabs(best - v[s])
                if d > delta:
                    delta = d
            for s in range(n_states):
                v[s] = scratch[s]
            if delta < theta:
                break
    if max_sweeps <= 0:
        return 0, delta
    return sweep + 1, delta


def build_predecessors(int[:, ::1] succ, int[::1] nnz, Py_ssize_t n_states,
                       Py_ssize_t n_actions, int[::1] pred_ptr, int[::1] pred_idx):
    """Reverse adjacency (CSR) of the model graph: who can reach each outcome.

    ``pred_idx`` must hold at least ``nnz[:n_states * n_actions].sum()`` entries.
    """
    cdef Py_ssize_t s, a, k, row, o, n_out = pred_ptr.shape[0] - 1
    memset(&pred_ptr[0], 0, pred_ptr.shape[0] * sizeof(int))
    for row in range(n_states * n_actions):
        for k in range(nnz[row]):
            pred_ptr[succ[row, k] + 1] += 1
    for o in range(n_out):
        pred_ptr[o + 1] += pred_ptr[o]
    for s in range(n_states):
        for a in range(n_actions):
            row = s * n_actions + a
            for k in range(nnz[row]):
                o = succ[row, k]
                pred_idx[pred_ptr[o]] = <int> s
                pred_ptr[o] += 1
    for o in range(n_out, 0, -1):
        pred_ptr[o] = pred_ptr[o - 1]
    pred_ptr[0] = 0


cdef Py_ssize_t _plan_incremental(int[:, ::1] succ, double[:, ::1] prob, int[::1] nnz,
                                  double[::1] rhat, double[::1] v, Py_ssize_t n_actions,
                                  double gamma, double theta, Py_ssize_t max_sweeps,
                                  double[::1] scratch, unsigned char[::1] dirty,
                                  int[::1] queue, int[::1] changed, Py_ssize_t n_dirty,
                                  int[::1] pred_ptr, int[::1] pred_idx,
                                  Py_ssize_t* sweeps_out, double* delta_out) noexcept nogil:
    cdef Py_ssize_t sweep = 0, i, j, k, n, a, s, p, row, n_changed
    cdef Py_ssize_t width = succ.shape[1]
    cdef const int* sp = &succ[0, 0]
    cdef const double* pp = &prob[0, 0]
    cdef const int* np_ = &nnz[0]
    cdef const double* rp = &rhat[0]
    cdef double* vp = &v[0]
    cdef double q, tot, best, d, delta = INFINITY
    while sweep < max_sweeps:
        sweep += 1
        delta = 0.0
        # Same arithmetic as _backup, on raw pointers.
        for i in range(n_dirty):
            best = -INFINITY
            row = queue[i] * n_actions
            for a in range(n_actions):
                n = np_[row]
                tot = 0.0
                for k in range(n):
                    tot += pp[row * width + k] * vp[sp[row * width + k]]
                q = rp[row] + gamma * tot
                if q > best:
                    best = q
                row += 1
            scratch[i] = best
        n_changed = 0
        for i in range(n_dirty):
            s = queue[i]
            dirty[s] = 0
            best = scratch[i]
            if best != v[s]:
                d = fabs(best - v[s])
                if d > delta:
                    delta = d
                v[s] = best
                changed[n_changed] = <int> s
                n_changed += 1
        n_dirty = 0
        for i in range(n_changed):
            s = changed[i]
            for j in range(pred_ptr[s], pred_ptr[s + 1]):
                p = pred_idx[j]
                if not dirty[p]:
                    dirty[p] = 1
                    queue[n_dirty] = <int> p
                    n_dirty += 1
        if delta < theta:
            break
    sweeps_out[0] = sweep
    delta_out[0] = delta
    return n_dirty


def plan_incremental(int[:, ::1] succ, double[:, ::1] prob, int[::1] nnz,
                     double[::1] rhat, double[::1] v, Py_ssize_t n_states,
                     Py_ssize_t n_actions, double gamma, double theta,
                     Py_ssize_t max_sweeps, double[::1] scratch,
                     unsigned char[::1] dirty, int[::1] queue, int[::1] changed,
                     Py_ssize_t n_dirty, int[::1] pred_ptr, int[::1] pred_idx):
    """Jacobi value iteration restricted to states whose backup may have moved.

    A state outside the dirty set satisfies ``v[s] == backup(v)[s]`` exactly,
    so sweeping only the dirty set gives the same values, deltas and sweep
    counts as full sweeps. Returns ``(sweeps, delta, n_dirty)``.
    """
    cdef Py_ssize_t sweeps = 0
    cdef double delta = INFINITY
    with nogil:
        n_dirty = _plan_incremental(succ, prob, nnz, rhat, v, n_actions, gamma, theta,
                                    max_sweeps, scratch, dirty, queue, changed, n_dirty,
                                    pred_ptr, pred_idx, &sweeps, &delta)
    return sweeps, delta, n_dirty


cdef void _true_online(double[::1] w, double[::1] z, Py_ssize_t* idx, Py_ssize_t m,
                       double alpha, double gl, double delta, double q,
                       double q_old) noexcept nogil:
    cdef Py_ssize_t i, n = w.shape[0]
    cdef double zx = 0.0, c, bump
    for i in range(m):
        zx += z[idx[i]]
    if gl != 0.0:
        for i in range(n):
            z[i] *= gl
    else:
        for i in range(n):
            z[i] = 0.0
    bump = 1.0 - alpha * gl * zx
    for i in range(m):
        z[idx[i]] += bump
    c = alpha * (delta + q - q_old)
    if c != 0.0:
        for i in range(n):
            w[i] += c * z[i]
    c = alpha * (q - q_old)
    for i in range(m):
        w[idx[i]] -= c


def true_online_update(double[::1] w, double[::1] z, Py_ssize_t[::1] idx,
                       double alpha, double gl, double delta, double q,
                       double q_old):
    with nogil:
        _true_online(w, z, &idx[0], idx.shape[0], alpha, gl, delta, q, q_old)


def tile_indices(double x, double v, double x_lo, double x_hi, double v_lo,
                 double v_hi, Py_ssize_t n_tilings, Py_ssize_t tiles,
                 Py_ssize_t[::1] out):
    cdef Py_ssize_t k, ix, iv
    cdef double sx = (x - x_lo) / (x_hi - x_lo) * tiles
    cdef double sv = (v - v_lo) / (v_hi - v_lo) * tiles
    cdef double off
    for k in range(n_tilings):
        off = <double> k / n_tilings
        ix = <Py_ssize_t> floor(sx + off)
        iv = <Py_ssize_t> floor(sv + off)
        if ix > tiles - 1:
            ix = tiles - 1
        if iv > tiles - 1:
            iv = tiles - 1
        out[k] = k * tiles * tiles + iv * tiles + ix


def sum_at(double[::1] w, Py_ssize_t[::1] idx, Py_ssize_t offset):
    cdef Py_ssize_t i
    cdef double tot = 0.0
    for i in range(idx.shape[0]):
        tot += w[offset + idx[i]]
    return tot


# ---------------------------------------------------------------------------
# Compiled tabular phase loop

cdef class _Stream:
    """View of an ``RngStream``'s uniform block; ``commit`` writes the cursor back."""

    cdef object owner
    cdef double[::1] arr
    cdef Py_ssize_t pos, n

    def __cinit__(self, owner):
        self.owner = owner
        if owner._arr is None or owner._pos >= len(owner._buf):
            self.n = 0
            self.pos = 0
        else:
            self.arr = owner._arr
            self.n = self.arr.shape[0]
            self.pos = owner._pos

    cdef double next(self) except -1.0:
        if self.pos >= self.n:
            self.owner._refill()
            self.arr = self.owner._arr
            self.n = self.arr.shape[0]
            self.pos = 0
        self.pos += 1
        return self.arr[self.pos - 1]

    cdef Py_ssize_t integers(self, Py_ssize_t n) except -1:
        cdef Py_ssize_t k = <Py_ssize_t> (self.next() * n)
        return k if k < n else n - 1

    cdef void commit(self):
        self.owner._pos = self.pos


DEF K_SARSA = 0
DEF K_QLEARN = 1
DEF K_MBVI = 2
DEF K_MBSU = 3
DEF K_NSTEP = 4

AGENT_KINDS = {"sarsa_lambda": K_SARSA, "q_learning": K_QLEARN, "mb_vi": K_MBVI,
               "mb_su": K_MBSU, "nstep_model": K_NSTEP}


cdef class _Loop:
    # environment: base tables, optional state multiplier
    cdef int[:, ::1] nxt
    cdef double[:, ::1] rew
    cdef Py_ssize_t S0, S, A, m
    # agent
    cdef object agent, model
    cdef int kind, learning
    cdef double gamma, alpha, eps, gl, discount_n, q_old
    cdef Py_ssize_t s, a, nstep
    cdef double[::1] q, z, v, qbuf
    cdef Py_ssize_t idx[1]
    cdef int[:, ::1] succ
    cdef double[:, ::1] prob
    cdef int[::1] nnz
    cdef double[::1] rhat
    # incremental planner
    cdef double theta
    cdef Py_ssize_t max_sweeps, n_dirty, last_sweeps
    cdef double last_delta
    cdef int preds_stale
    cdef double[::1] scratch
    cdef unsigned char[::1] dirty
    cdef int[::1] queue, changed, pred_ptr, pred_idx
    # n-step episode buffer
    cdef int[::1] buf_s, buf_a
    cdef double[::1] buf_r
    cdef Py_ssize_t blen
    cdef int pending, terminated, final_outcome

    def __cinit__(self, agent, int kind, int[:, ::1] nxt, double[:, ::1] rew, Py_ssize_t m,
                  Py_ssize_t episode_cap):
        self.agent = agent
        self.kind = kind
        self.nxt, self.rew = nxt, rew
        self.S0, self.A, self.m = nxt.shape[0], nxt.shape[1], m
        self.S = self.S0 * m
        self.gamma = agent.gamma
        self.alpha = agent.alpha
        self.learning = bool(agent.learning)
        self.s = -1 if agent._s is None else agent._s
        self.a = -1 if agent._a is None else agent._a
        if kind == K_SARSA or kind == K_QLEARN:
            self.q = agent.q.reshape(-1)
        if kind == K_SARSA:
            self.z = agent.z
            self.gl = agent.gamma * agent.cfg.lam
            self.q_old = agent.q_old
        if kind >= K_MBVI:
            self.model = agent.model
            self._sync_model()
            self.v = agent.v
            self.qbuf = agent._q
        if kind == K_MBVI:
            self.theta = agent.theta
            self.max_sweeps = agent.max_sweeps
            self.scratch = agent._scratch
            self.dirty, self.queue, self.changed = agent._dirty, agent._queue, agent._changed
            self.n_dirty = agent._n_dirty
            self.preds_stale = self.model.appends != agent._pred_version
            self._sync_preds()
        if kind == K_NSTEP:
            self.nstep = agent.n
            self.discount_n = agent.discount_n
            self.buf_s = np.zeros(episode_cap + 1, dtype=np.int32)
            self.buf_a = np.zeros(episode_cap + 1, dtype=np.int32)
            self.buf_r = np.zeros(episode_cap + 1)
            self.blen = 0
            self.pending = 0
            self.terminated = 0
            self.final_outcome = -1

    cdef _sync_model(self):
        self.succ, self.prob = self.model.succ, self.model.prob
        self.nnz, self.rhat = self.model.nnz, self.model.rhat

    cdef _sync_preds(self):
        if self.preds_stale:
            self.agent._rebuild_predecessors()
            self.preds_stale = 0
        self.pred_ptr, self.pred_idx = self.agent._pred_ptr, self.agent._pred_idx

    def write_back(self):
        agent = self.agent
        agent._s = None if self.s < 0 else self.s
        agent._a = None if self.a < 0 else self.a
        agent.epsilon = self.eps
        if self.kind == K_SARSA:
            agent.q_old = self.q_old
        if self.kind == K_MBVI:
            agent._n_dirty = self.n_dirty
            agent.last_plan = (self.last_sweeps, self.last_delta)
        if self.kind == K_NSTEP:
            agent.buffer = []
            agent.pending = False
            agent.terminated = bool(self.terminated)
            agent.final_outcome = None if self.final_outcome < 0 else self.final_outcome

    # -- environment --------------------------------------------------------

    cdef Py_ssize_t reset(self, int[::1] starts, _Stream rng, _Stream noise) except -1:
        cdef Py_ssize_t b = starts[rng.integers(starts.shape[0])]
        if noise is None:
            return b
        return b * self.m + noise.integers(self.m)

    cdef Py_ssize_t step_env(self, Py_ssize_t s, Py_ssize_t a, _Stream noise,
                             double* reward, int* tag) except -1:
        cdef Py_ssize_t b = s // self.m
        cdef Py_ssize_t nb = self.nxt[b, a]
        reward[0] = self.rew[b, a]
        if nb >= self.S0:
            tag[0] = <int> (nb - self.S0)
            return self.S + tag[0]
        tag[0] = -1
        if noise is None:
            return nb
        return nb * self.m + noise.integers(self.m)

    # -- agent --------------------------------------------------------------

    cdef Py_ssize_t choose(self, double* qs, double eps, _Stream rng) except -1:
        cdef Py_ssize_t i, n = self.A, count = 0, pick
        cdef double best
        if eps > 0.0 and rng.next() < eps:
            return rng.integers(n)
        best = qs[0]
        for i in range(1, n):
            if qs[i] > best:
                best = qs[i]
        for i in range(n):
            if qs[i] == best:
                count += 1
        pick = 0 if count == 1 else rng.integers(count)
        for i in range(n):
            if qs[i] == best:
                if pick == 0:
                    return i
                pick -= 1
        return n - 1

    cdef double* model_qs(self, Py_ssize_t s, double discount) noexcept:
        cdef Py_ssize_t a
        for a in range(self.A):
            self.qbuf[a] = _q(self.succ, self.prob, self.nnz, self.rhat, self.v,
                              s * self.A + a, discount)
        return &self.qbuf[0]

    cdef double qmax(self, double* qs) noexcept:
        cdef Py_ssize_t i
        cdef double best = qs[0]
        for i in range(1, self.A):
            if qs[i] > best:
                best = qs[i]
        return best

    cdef int model_update(self, Py_ssize_t s, Py_ssize_t a, int outcome, double r) except -1:
        cdef int res = _model_update(self.succ, self.prob, self.nnz, self.rhat,
                                     s * self.A + a, outcome, r, self.alpha)
        while res == MODEL_FULL:
            self.model._grow()
            self._sync_model()
            res = _model_update(self.succ, self.prob, self.nnz, self.rhat,
                                s * self.A + a, outcome, r, self.alpha)
        if res == MODEL_APPEND:
            self.model.appends += 1
            self.preds_stale = 1
        return res

    cdef int plan(self) except -1:
        if self.preds_stale:
            self._sync_preds()
        self.n_dirty = _plan_incremental(
            self.succ, self.prob, self.nnz, self.rhat, self.v, self.A, self.gamma,
            self.theta, self.max_sweeps, self.scratch, self.dirty, self.queue, self.changed,
            self.n_dirty, self.pred_ptr, self.pred_idx, &self.last_sweeps, &self.last_delta)
        return 0

    cdef void mark(self, Py_ssize_t s) noexcept:
        if not self.dirty[s]:
            self.dirty[s] = 1
            self.queue[self.n_dirty] = <int> s
            self.n_dirty += 1

    cdef Py_ssize_t nstep_act(self, Py_ssize_t s, _Stream rng) except -1:
        cdef double* qs = self.model_qs(s, self.discount_n)
        cdef Py_ssize_t a
        if self.learning:
            self.v[s] = (1.0 - self.alpha) * self.v[s] + self.alpha * self.qmax(qs)
        a = self.choose(qs, self.eps, rng)
        self.buf_s[self.blen] = <int> s
        self.buf_a[self.blen] = <int> a
        self.buf_r[self.blen] = 0.0
        self.blen += 1
        self.pending = 1
        self.s, self.a = s, a
        return a

    cdef Py_ssize_t begin(self, Py_ssize_t s, _Stream rng) except -1:
        cdef Py_ssize_t a
        if self.kind == K_SARSA:
            self.z[:] = 0.0
            self.q_old = 0.0
            a = self.choose(&self.q[s * self.A], self.eps, rng)
        elif self.kind == K_QLEARN:
            a = self.choose(&self.q[s * self.A], self.eps, rng)
        elif self.kind == K_MBVI:
            a = self.choose(self.model_qs(s, self.gamma), self.eps, rng)
        elif self.kind == K_MBSU:
            if self.learning:
                self.v[s] = self.qmax(self.model_qs(s, self.gamma))
            a = self.choose(self.model_qs(s, self.gamma), self.eps, rng)
        else:
            self.blen = 0
            self.final_outcome = -1
            self.terminated = 0
            return self.nstep_act(s, rng)
        self.s, self.a = s, a
        return a

    cdef Py_ssize_t step(self, double r, Py_ssize_t s2, int tag, _Stream rng) except -2:
        """Next action, or -1 after a terminal transition."""
        cdef Py_ssize_t a2 = -1, row = self.s * self.A + self.a
        cdef double qn = 0.0, q_sa, delta, target
        cdef int outcome = <int> s2
        if self.kind == K_SARSA:
            if tag < 0:
                a2 = self.choose(&self.q[s2 * self.A], self.eps, rng)
                qn = self.q[s2 * self.A + a2]
            if self.learning:
                q_sa = self.q[row]
                delta = r + self.gamma * qn - q_sa
                self.idx[0] = row
                _true_online(self.q, self.z, self.idx, 1, self.alpha, self.gl, delta, q_sa, self.q_old)
            self.q_old = qn
            self.s, self.a = s2, a2
            return a2
        if self.kind == K_QLEARN:
            if self.learning:
                if tag >= 0:
                    target = r
                else:
                    target = r + self.gamma * self.qmax(&self.q[s2 * self.A])
                self.q[row] += self.alpha * (target - self.q[row])
            if tag >= 0:
                self.s = self.a = -1
                return -1
            self.s = s2
            self.a = self.choose(&self.q[s2 * self.A], self.eps, rng)
            return self.a
        if self.kind == K_NSTEP:
            self.buf_r[self.blen - 1] = r
            self.pending = 0
            self.final_outcome = outcome
            if tag >= 0:
                self.terminated = 1
                self.s = self.a = -1
                return -1
            return self.nstep_act(s2, rng)
        if self.learning:
            self.model_update(self.s, self.a, outcome, r)
            if self.kind == K_MBVI:
                self.mark(self.s)
                self.plan()
        if tag >= 0:
            self.s = self.a = -1
            return -1
        return self.begin(s2, rng)

    cdef int end(self) except -1:
        cdef Py_ssize_t T, t, k, kmax, target
        cdef double ret
        if self.kind != K_NSTEP:
            return 0
        if self.learning:
            T = self.blen - self.pending
            for t in range(T):
                if t + self.nstep < T:
                    target = self.buf_s[t + self.nstep]
                elif t + self.nstep == T or self.terminated:
                    target = self.final_outcome
                else:
                    continue
                ret = 0.0
                kmax = self.nstep if self.nstep < T - t else T - t
                for k in range(kmax - 1, -1, -1):
                    ret = self.buf_r[t + k] + self.gamma * ret
                self.model_update(self.buf_s[t], self.buf_a[t], <int> target, ret)
        self.blen = 0
        self.pending = 0
        return 0

    cdef Py_ssize_t greedy(self, Py_ssize_t s, _Stream rng) except -1:
        if self.kind == K_SARSA or self.kind == K_QLEARN:
            return self.choose(&self.q[s * self.A], 0.0, rng)
        if self.kind == K_NSTEP:
            return self.choose(self.model_qs(s, self.discount_n), 0.0, rng)
        return self.choose(self.model_qs(s, self.gamma), 0.0, rng)

    cdef double evaluate(self, int[::1] starts, Py_ssize_t episodes, Py_ssize_t deadline,
                         _Stream rng, _Stream noise) except -1.0:
        cdef Py_ssize_t e, k, s, hits = 0
        cdef double r
        cdef int tag
        for e in range(episodes):
            s = self.reset(starts, rng, noise)
            for k in range(deadline):
                s = self.step_env(s, self.greedy(s, rng), noise, &r, &tag)
                if tag >= 0:
                    hits += tag == 1
                    break
        return <double> hits / episodes


def run_tabular_phase(agent, str kind, int[:, ::1] nxt, double[:, ::1] rew,
                      Py_ssize_t m, int[::1] starts, train_rng, train_noise,
                      Py_ssize_t steps, Py_ssize_t cap, double eps0, double decay,
                      Py_ssize_t delta_train=0, int[::1] eval_starts=None,
                      Py_ssize_t eval_episodes=0, Py_ssize_t deadline=0,
                      eval_rng=None, eval_noise=None):
    """Compiled equivalent of ``protocol.run_phase`` for a tabular agent.

    ``decay`` is the per-step geometric epsilon factor, or 0 for a constant
    epsilon. Noise streams are None when the environment is not wrapped by a
    state multiplier. Returns ``(step, fraction)`` evaluation pairs.
    """
    cdef _Loop L = _Loop(agent, AGENT_KINDS[kind], nxt, rew, m, cap)
    cdef _Stream rng = _Stream(train_rng)
    cdef _Stream noise = None if train_noise is None else _Stream(train_noise)
    cdef _Stream erng = None if eval_rng is None else _Stream(eval_rng)
    cdef _Stream enoise = None if eval_noise is None else _Stream(eval_noise)
    cdef Py_ssize_t t, k = 0, s = -1, a = 0, s2
    cdef double r
    cdef int tag
    points = []
    L.eps = eps0
    try:
        for t in range(1, steps + 1):
            if decay != 0.0:
                L.eps = eps0 * pow(decay, <double> (t - 1))
            if s < 0:
                s = L.reset(starts, rng, noise)
                a = L.begin(s, rng)
                k = 0
            s2 = L.step_env(s, a, noise, &r, &tag)
            k += 1
            a = L.step(r, s2, tag, rng)
            if tag >= 0 or k >= cap:
                L.end()
                s = -1
            else:
                s = s2
            if delta_train and t % delta_train == 0:
                points.append((t, L.evaluate(eval_starts, eval_episodes, deadline, erng, enoise)))
        if s >= 0:
            L.end()
    finally:
        rng.commit()
        if noise is not None:
            noise.commit()
        if erng is not None:
            erng.commit()
        if enoise is not None:
            enoise.commit()
        L.write_back()
    return points
