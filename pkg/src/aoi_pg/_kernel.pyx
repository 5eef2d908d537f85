# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled delivery loop.

Mirrors ``_pyloop.run_steps`` operation for operation: same random draws in
the same order, same bookkeeping order, same cost formulas.  Agent, channel
and stream state is read from the Python objects on entry and written back
on exit (also when a run aborts).
"""

from libc.math cimport exp, log, cos, sqrt, fabs, floor, expm1, pow, INFINITY
from libc.stdlib cimport malloc, free

import math

from .agents import AgentAbort, MAX_ATTEMPTS, DELTA_LIMIT

cdef double G_LIMIT = 700.0

cdef enum:
    K_WAIT = 0
    K_DISCARD = 1
    K_COMBINED = 2
    K_ZERO_WAIT = 3
    K_MAX_DELAY = 4
    K_FIXED = 5

_KIND_CODES = {"wait": K_WAIT, "discard": K_DISCARD, "combined": K_COMBINED,
               "zero_wait": K_ZERO_WAIT, "max_delay": K_MAX_DELAY, "fixed": K_FIXED}


cdef class _Stream:
    cdef object obj
    cdef double[::1] buf
    cdef Py_ssize_t pos, size

    def __cinit__(self, obj):
        self.obj = obj
        self.buf = obj.buf
        self.pos = obj.pos
        self.size = obj.size

    cdef inline double draw(self):
        cdef double v
        if self.pos >= self.size:
            self.obj.refill()
            self.buf = self.obj.buf
            self.pos = 0
        v = self.buf[self.pos]
        self.pos += 1
        return v

    cdef void sync(self):
        self.obj.pos = self.pos


cdef class _Chan:
    cdef int kind
    cdef _Stream stream
    cdef double eta, innov, sigma_d, log_norm, mean_scale, s
    cdef double p, q, y0, y1
    cdef int state
    cdef object obj

    def __cinit__(self, obj):
        self.obj = obj
        self.stream = _Stream(obj.stream)
        if obj.kind == "lognormal":
            self.kind = 0
            self.eta = obj.eta
            self.innov = obj.innov
            self.sigma_d = obj.sigma_d
            self.log_norm = obj.log_norm
            self.mean_scale = obj.mean_scale
            self.s = obj.s
        elif obj.kind == "gilbert_elliot":
            self.kind = 1
            self.p = obj.p
            self.q = obj.q
            self.y0 = obj.y0
            self.y1 = obj.y1
            self.state = obj.state
        else:
            raise NotImplementedError(f"kernel has no support for channel {obj.kind!r}")

    cdef inline double next_delay(self):
        cdef double u
        if self.kind == 0:
            self.s = self.eta * self.s + self.innov * self.stream.draw()
            return self.mean_scale * exp(self.sigma_d * self.s - self.log_norm)
        u = self.stream.draw()
        if self.state == 0:
            if u < self.p:
                self.state = 1
        elif u < self.q:
            self.state = 0
        return self.y1 if self.state else self.y0

    cdef void sync(self):
        self.stream.sync()
        if self.kind == 0:
            self.obj.s = self.s
        else:
            self.obj.state = self.state


cdef inline double _step_anti(double gamma, double x):
    cdef double m = floor(gamma * x)
    return m * (m - 1) / (2.0 * gamma) + m * (x - m / gamma)


cdef inline double _integral(int code, double gamma, double eta, double a, double b):
    cdef double g1
    if code == 0:
        return 0.5 * (b - a) * (b + a)
    if code == 1:
        g1 = gamma + 1.0
        return (pow(b, g1) - pow(a, g1)) / g1
    if code == 2:
        return exp(gamma * a) * expm1(gamma * (b - a)) / gamma
    if code == 3:
        return _step_anti(gamma, b) - _step_anti(gamma, a)
    return eta * (exp(gamma * a) * expm1(gamma * (b - a)) / gamma - (b - a))


cdef inline void _neumaier(double* total, double* comp, double x):
    cdef double t = total[0] + x
    if fabs(total[0]) >= fabs(x):
        comp[0] += (total[0] - t) + x
    else:
        comp[0] += (x - t) + total[0]
    total[0] = t


cdef class _Feat:
    cdef int ndim, size
    cdef double y_max, yb_max
    cdef double[::1] kj, kk

    def __cinit__(self, feats):
        self.ndim = feats.ndim
        self.size = feats.size
        self.y_max = feats.y_max
        if self.ndim == 1:
            self.kj = feats._k
            self.yb_max = INFINITY
        else:
            self.kj = feats._j
            self.kk = feats._k
            self.yb_max = feats.yb_max

    cdef inline bint in_range(self, double y, double yb):
        if self.ndim == 1:
            return y < self.y_max
        return y < self.y_max and yb < self.yb_max

    cdef inline void fill(self, double y, double yb, double* out):
        cdef int i
        cdef double ym = y if y < self.y_max else self.y_max
        cdef double ybm
        if self.ndim == 1:
            for i in range(self.size):
                out[i] = cos(self.kj[i] * ym)
        else:
            ybm = yb if yb < self.yb_max else self.yb_max
            for i in range(self.size):
                out[i] = cos(self.kj[i] * ym + self.kk[i] * ybm)


cdef inline double _dot(double[::1] a, double* b, int n):
    cdef double s = 0.0
    cdef int i
    for i in range(n):
        s += a[i] * b[i]
    return s


cdef inline double _transform(double g, double a_min, double a_max, double eps):
    cdef double a
    if g < -G_LIMIT:
        g = -G_LIMIT
    elif g > G_LIMIT:
        g = G_LIMIT
    a = a_max - (a_max - a_min) / (1.0 + exp(g))
    if a < a_min + eps:
        a = a_min + eps
    if a > a_max - eps:
        a = a_max - eps
    return a


def run_steps(agent, env, double t_end, long long max_steps, long long record_every,
              int n_bins, double bin_ymax, list records,
              double[::1] wait_sum, long long[::1] wait_cnt,
              double[::1] disc_sum, long long[::1] disc_cnt):
    """Compiled twin of ``aoi_pg._pyloop.run_steps``."""
    cdef int kind = _KIND_CODES[agent.kind]
    cdef bint learning = kind <= K_COMBINED
    cdef bint has_wait = agent.wait is not None
    cdef bint has_disc = agent.discard is not None
    cdef bint has_critic = agent.critic is not None
    cdef bint record_wait = kind != K_DISCARD
    cdef _Chan chan = _Chan(env.channel)
    cdef _Chan back = _Chan(env.backward) if env.backward is not None else None
    cdef object cost = env.cost
    cdef bint peak = cost.kind == "peak"
    cdef int pcode = cost.penalty.code
    cdef double pgamma = cost.penalty.gamma, peta = cost.penalty.eta, a_th = cost.a_th
    cdef double f = agent.f
    cdef double alpha_theta = agent.alpha_theta, alpha_omega = agent.alpha_omega
    cdef double x_max_base = agent.x_max

    cdef _Stream pstream = _Stream(agent.stream) if learning else None
    cdef _Feat feat = None
    cdef double[::1] th_w, th_d, omega
    cdef double wa_min = 0, wa_max = 0, w_sigma = 1, w_eps = 0, w_fb = 0
    cdef double da_min = 0, da_max = 0, d_sigma = 1, d_eps = 0, d_fb = 0
    if has_wait:
        feat = _Feat(agent.wait.features)
        th_w = agent.wait.theta
        wa_min, wa_max, w_sigma = agent.wait.a_min, agent.wait.a_max, agent.wait.sigma
        w_eps, w_fb = agent.wait.eps, agent.wait.fallback
    if has_disc:
        if feat is None:
            feat = _Feat(agent.discard.features)
        th_d = agent.discard.theta
        da_min, da_max, d_sigma = agent.discard.a_min, agent.discard.a_max, agent.discard.sigma
        d_eps, d_fb = agent.discard.eps, agent.discard.fallback
    if has_critic:
        omega = agent.critic.omega

    cdef double[::1] tab_y, tab_z, tab_x
    cdef int n_tab = 0
    if kind == K_FIXED:
        import numpy as np
        tab_y = np.ascontiguousarray(agent._table_y, dtype=float)
        tab_z = np.array([zx[0] for zx in agent._table_zx], dtype=float)
        tab_x = np.array([zx[1] for zx in agent._table_zx], dtype=float)
        n_tab = tab_y.shape[0]

    cdef int nf = feat.size if feat is not None else 0
    cdef double* f_now = <double*> malloc((nf + 1) * sizeof(double))
    cdef double* f_next = <double*> malloc((nf + 1) * sizeof(double))

    cdef double c_tot = agent.c.total, c_comp = agent.c.comp
    cdef double d_tot = agent.d.total, d_comp = agent.d.comp
    cdef double y = agent.y, yb = agent.yb
    cdef long long steps = agent.steps
    cdef double last_delta = agent.last_delta
    cdef double bin_scale = n_bins / bin_ymax

    cdef double z, x, w, c_u, delay, y_next, yb_next, step_cost, delta, stepsz, score, mu, lg, best
    cdef long long k
    cdef int i, b
    cdef bint in_range
    cdef object err = None

    try:
        while d_tot + d_comp < t_end and steps < max_steps:
            # actions
            in_range = False
            if learning:
                in_range = feat.in_range(y, yb)
                if in_range:
                    feat.fill(y, yb, f_now)
            if kind == K_ZERO_WAIT:
                z = 0.0
                x = INFINITY
            elif kind == K_MAX_DELAY:
                z = 0.0
                x = x_max_base
            elif kind == K_FIXED:
                b = 0
                best = fabs(tab_y[0] - y)
                for i in range(1, n_tab):
                    if fabs(tab_y[i] - y) < best:
                        best = fabs(tab_y[i] - y)
                        b = i
                z = tab_z[b]
                x = tab_x[b]
            else:
                z = 0.0
                x = INFINITY
                if has_wait:
                    if in_range:
                        z = _transform(_dot(th_w, f_now, nf) + w_sigma * pstream.draw(),
                                       wa_min, wa_max, w_eps)
                    else:
                        z = w_fb
                if has_disc:
                    if in_range:
                        x = _transform(_dot(th_d, f_now, nf) + d_sigma * pstream.draw(),
                                       da_min, da_max, d_eps)
                    else:
                        x = d_fb

            # transmission attempts
            k = 1
            delay = chan.next_delay()
            while delay > x:
                k += 1
                if k > MAX_ATTEMPTS:
                    err = AgentAbort(f"discard threshold {x} cancelled {MAX_ATTEMPTS} attempts in a row")
                    break
                delay = chan.next_delay()
            if err is not None:
                break
            y_next = delay
            w = yb + z + y_next
            if k > 1:
                w += (k - 1) * x
            if peak:
                c_u = 1.0 if y + w > a_th else 0.0
            else:
                c_u = _integral(pcode, pgamma, peta, y, y + w)
            yb_next = back.next_delay() if back is not None else 0.0

            step_cost = k * f + c_u
            _neumaier(&c_tot, &c_comp, step_cost)
            if learning and in_range:
                delta = -step_cost + w * (c_tot + c_comp) / (d_tot + d_comp)
                if has_critic:
                    feat.fill(y_next, yb_next, f_next)
                    delta += _dot(omega, f_next, nf) - _dot(omega, f_now, nf)
                if not (fabs(delta) <= DELTA_LIMIT):
                    err = AgentAbort(f"delta={delta} at step {steps} (state y={y}, yb={yb}, "
                                     f"C={c_tot + c_comp}, D={d_tot + d_comp})")
                    break
                stepsz = alpha_theta * delta
                if has_wait:
                    mu = _dot(th_w, f_now, nf)
                    lg = log((z - wa_min) / (wa_max - z))
                    score = (lg - mu) / (w_sigma * w_sigma)
                    for i in range(nf):
                        th_w[i] += (stepsz * score) * f_now[i]
                if has_disc:
                    mu = _dot(th_d, f_now, nf)
                    lg = log((x - da_min) / (da_max - x))
                    score = (lg - mu) / (d_sigma * d_sigma)
                    for i in range(nf):
                        th_d[i] += (stepsz * score) * f_now[i]
                if has_critic:
                    for i in range(nf):
                        omega[i] += (alpha_omega * delta) * f_now[i]
                last_delta = delta
            _neumaier(&d_tot, &d_comp, w)

            if y < bin_ymax:
                b = <int>(y * bin_scale)
                if b > n_bins - 1:
                    b = n_bins - 1
                if record_wait:
                    wait_sum[b] += z
                    wait_cnt[b] += 1
                if x < INFINITY:
                    disc_sum[b] += x
                    disc_cnt[b] += 1
            steps += 1
            if steps % record_every == 0:
                records.append((steps, d_tot + d_comp, (c_tot + c_comp) / (d_tot + d_comp),
                                z, x, y))
            y = y_next
            yb = yb_next
    finally:
        free(f_now)
        free(f_next)
        agent.c.total = c_tot
        agent.c.comp = c_comp
        agent.d.total = d_tot
        agent.d.comp = d_comp
        agent.y = y
        agent.yb = yb
        agent.steps = steps
        agent.last_delta = last_delta
        chan.sync()
        if back is not None:
            back.sync()
        if pstream is not None:
            pstream.sync()
    if err is not None:
        raise err
