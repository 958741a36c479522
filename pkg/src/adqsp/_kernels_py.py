"""Pure numpy implementations of the iteration kernels.

These mirror ``_kernels.pyx`` operation for operation (same summation
order, same rounding rule) so both backends produce identical floats.
Row ``t`` of every returned log holds the quantity with superscript
``t + 1``.
"""

import numpy as np


def plain_iterate(s, owner, sign, rev, deg, z0, c, theta, t_max):
    n = s.shape[0]
    z = np.array(z0, dtype=float)
    denom = 1.0 + c * deg
    sign_rev = sign[rev]
    owner_rev = owner[rev]
    x_traj = np.empty((t_max, n))
    for t in range(t_max):
        x = (s - np.bincount(owner, weights=sign * z, minlength=n)) / denom
        z = theta * z + (1.0 - theta) * (z[rev] + 2.0 * c * sign_rev * x[owner_rev])
        x_traj[t] = x
    return x_traj, z


def adqsp_iterate(s, owner, sign, rev, deg, z0, c, theta, widths, half, dither):
    n = s.shape[0]
    t_max, n_entries = dither.shape
    zh = np.array(z0, dtype=float)
    denom = 1.0 + c * deg
    sign_rev = sign[rev]
    owner_rev = owner[rev]
    x_traj = np.empty((t_max, n))
    dzhat = np.empty((t_max, n_entries))
    noise = np.empty((t_max, n_entries))
    level = np.empty((t_max, n_entries), dtype=np.int64)
    sat = np.zeros(t_max, dtype=np.int64)
    for t in range(t_max):
        x = (s - np.bincount(owner, weights=sign * zh, minlength=n)) / denom
        znew = theta * zh + (1.0 - theta) * (zh[rev] + 2.0 * c * sign_rev * x[owner_rev])
        dz = znew - zh
        width = widths[t]
        d = dither[t] * width
        y = (dz + d) / width
        a = np.where(y >= 0.0, np.floor(y), np.ceil(y) - 1.0)
        over = (a < -half) | (a > half - 1)
        sat[t] = np.count_nonzero(over)
        a = np.clip(a, -half, half - 1)
        q = width * (a + 0.5) - d
        zh = zh + q
        x_traj[t] = x
        dzhat[t] = q
        noise[t] = q - dz
        level[t] = a.astype(np.int64)
    return x_traj, dzhat, noise, level, sat, zh
