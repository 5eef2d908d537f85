"""Pure-Python delivery loop (fallback for the compiled kernel)."""

from __future__ import annotations

import math


def run_steps(agent, env, t_end, max_steps, record_every, n_bins, bin_ymax, records,
              wait_sum, wait_cnt, disc_sum, disc_cnt):
    """Step ``agent`` until ``D >= t_end`` or ``max_steps`` steps have run.

    Appends ``(step, D, beta_hat, z, x, y)`` to ``records`` every
    ``record_every`` steps and accumulates the actions taken per state bin.
    """
    record_wait = agent.kind != "discard"
    bin_scale = n_bins / bin_ymax
    while agent.d.value < t_end and agent.steps < max_steps:
        out = agent.step(env)
        if out.y < bin_ymax:
            b = min(int(out.y * bin_scale), n_bins - 1)
            if record_wait:
                wait_sum[b] += out.z
                wait_cnt[b] += 1
            if math.isfinite(out.x):
                disc_sum[b] += out.x
                disc_cnt[b] += 1
        if agent.steps % record_every == 0:
            records.append((agent.steps, agent.d.value, agent.c.value / agent.d.value,
                            out.z, out.x, out.y))
