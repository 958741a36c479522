"""Uniform mid-rise quantizer with a shrinking cell width, subtractive dither
and the differential encode/decode pair used on every directed edge.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "QuantizerSchedule",
    "DitherStream",
    "cell_width",
    "cell_widths",
    "default_delta0",
    "default_gamma",
    "dither_table",
    "quantize",
    "quantize_index",
    "diff_encode",
    "diff_decode",
]


@dataclass(frozen=True)
class QuantizerSchedule:
    """Cell-width schedule ``max(gamma**t * delta0, delta_min)`` and bit depth.

    Representation levels at step ``t`` are ``width * (a + 1/2)`` for the
    ``2**bits`` integers ``a`` in ``[-2**(bits-1), 2**(bits-1) - 1]``.
    """

    delta0: float
    gamma: float = 0.95
    delta_min: float = 0.0
    bits: int = 2

    def __post_init__(self):
        if not self.delta0 > 0:
            raise ValueError(f"delta0 must be positive, got {self.delta0}")
        if not 0 < self.gamma < 1:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        if not self.delta_min >= 0:
            raise ValueError(f"delta_min must be non-negative, got {self.delta_min}")
        if int(self.bits) != self.bits or self.bits < 1:
            raise ValueError(f"bits must be a positive integer, got {self.bits}")

    @property
    def half(self) -> int:
        """``2**(bits-1)``: number of levels on each side of zero."""
        return 1 << (int(self.bits) - 1)


def cell_width(sched: QuantizerSchedule, t: int) -> float:
    if t < 0:
        raise ValueError("t must be non-negative")
    return max(sched.gamma ** t * sched.delta0, sched.delta_min)


def cell_widths(sched: QuantizerSchedule, t_max: int) -> np.ndarray:
    """Widths used by quantization steps ``1..t_max`` (entry ``t`` is step ``t + 1``)."""
    t = np.arange(1, t_max + 1)
    return np.maximum(sched.delta0 * sched.gamma ** t, sched.delta_min)


def default_delta0(sigma_z: float, c: float) -> float:
    """Initial cell width ``4 * max(sigma_z, 1) * max(1, 2c)``.

    The first differences are dominated by the spread of the random
    initialisation; the ``max(sigma_z, 1)`` keeps the width usable when the
    initialisation is switched off.
    """
    return 4.0 * max(float(sigma_z), 1.0) * max(1.0, 2.0 * float(c))


def default_gamma(rate: float, floor: float = 0.95, margin: float = 0.005) -> float:
    """Decay rate ``max(floor, rate + margin)`` for a consensus contraction ``rate``.

    The cell width has to shrink more slowly than the consensus error,
    otherwise the differences outgrow the quantizer range and clamp.
    """
    return min(max(floor, rate + margin), 0.999)


def quantize_index(value, width, dither, half):
    """Level index, clamped index and saturation mask for dithered input.

    Ties round half away from zero, i.e. a point exactly on a cell boundary
    goes to the level further from the origin.
    """
    y = (np.asarray(value, dtype=float) + dither) / width
    a = np.where(y >= 0.0, np.floor(y), np.ceil(y) - 1.0)
    over = (a < -half) | (a > half - 1)
    return np.clip(a, -half, half - 1).astype(np.int64), over


def quantize(value, sched: QuantizerSchedule, t: int, dither, return_level: bool = False):
    """Subtractively dithered quantization at step ``t``.

    Parameters
    ----------
    value : float or array
        Input to quantize.
    sched : QuantizerSchedule
    t : int
        Step index selecting the cell width.
    dither : float or array
        Dither value, ``|dither| <= width / 2``.
    return_level : bool
        Also return the level index ``a`` (for transcripts) and a saturation flag.

    Returns
    -------
    out : float or array
        ``width * (a + 1/2) - dither``.
    """
    width = cell_width(sched, t)
    dither = np.asarray(dither, dtype=float)
    if np.any(np.abs(dither) > width / 2):
        raise ValueError("dither exceeds half a cell width")
    a, over = quantize_index(value, width, dither, sched.half)
    out = width * (a + 0.5) - dither
    if np.ndim(out) == 0:
        out, a, over = float(out), int(a), bool(over)
    if return_level:
        return out, a, over
    return out


def dither_table(seed, t_max: int, n_entries: int) -> np.ndarray:
    """Unit dither values in ``[-1/2, 1/2)``, one column per directed edge.

    Column ``e`` is the stream of directed edge ``e``; multiplying row ``t``
    by the step's cell width gives the actual dither. Both endpoints of an
    edge derive the same table from the shared seed.
    """
    rng = np.random.default_rng(seed)
    return rng.random((t_max, n_entries)) - 0.5


class DitherStream:
    """Sequential view of one column of a dither table.

    Sender and receiver each hold their own instance built from the same
    seed and advance them in lockstep.
    """

    def __init__(self, seed, entry: int, t_max: int, n_entries: int, table=None):
        if table is None:
            table = dither_table(seed, t_max, n_entries)
        self._col = np.array(table[:, entry])
        self._pos = 0

    def next(self, width: float) -> float:
        if self._pos >= self._col.shape[0]:
            raise IndexError("dither stream exhausted")
        u = self._col[self._pos] * width
        self._pos += 1
        return float(u)

    @property
    def position(self) -> int:
        return self._pos


def diff_encode(z_new: float, zhat_prev: float, t: int, sched: QuantizerSchedule,
                dither_stream: DitherStream):
    """Quantize the difference ``z_new - zhat_prev`` for transmission.

    Returns ``(delta_hat, noise)`` where ``noise = delta_hat - (z_new - zhat_prev)``,
    which also equals ``zhat_new - z_new`` after :func:`diff_decode`.
    """
    dz = z_new - zhat_prev
    u = dither_stream.next(cell_width(sched, t))
    delta_hat = quantize(dz, sched, t, u)
    return delta_hat, delta_hat - dz


def diff_decode(zhat_prev: float, delta_hat: float) -> float:
    return zhat_prev + delta_hat
