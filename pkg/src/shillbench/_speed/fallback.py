"""Numpy implementations of the per-sample reduction kernels.

Simulated auction profiles are ragged: sample ``i`` occupies
``flat[offsets[i]:offsets[i + 1]]``.  Every downstream revenue formula
only needs three order statistics per sample, so that reduction is the
single hot path worth a dedicated kernel.
"""

import numpy as np


def _row_top_two(flat, offsets, sentinel):
    starts = offsets[:-1]
    if starts.size == 0:
        empty = flat[:0]
        return empty.copy(), empty.copy(), np.zeros(0, dtype=np.int64)
    top = np.maximum.reduceat(flat, starts)
    lengths = np.diff(offsets)
    top_rep = np.repeat(top, lengths)
    tied = np.add.reduceat((flat == top_rep).astype(np.int64), starts)
    masked = np.where(flat == top_rep, sentinel, flat)
    second = np.maximum.reduceat(masked, starts)
    second = np.where(tied >= 2, top, second)
    return top, second, tied


def row_top_two_f64(flat, offsets):
    """Largest report, runner-up, and multiplicity of the largest, per sample.

    ``second`` is ``-inf`` when the sample has a single report.  When two
    or more reports tie for the top, ``second`` equals ``top``.
    """
    flat = np.ascontiguousarray(flat, dtype=np.float64)
    offsets = np.ascontiguousarray(offsets, dtype=np.int64)
    return _row_top_two(flat, offsets, -np.inf)


def row_top_two_i64(flat, offsets):
    """Integer-grid variant of :func:`row_top_two_f64`.

    Reports are grid indices in ``1..K``; ``second`` is ``0`` for a
    singleton sample, which conveniently reads as "below every reserve".
    """
    flat = np.ascontiguousarray(flat, dtype=np.int64)
    offsets = np.ascontiguousarray(offsets, dtype=np.int64)
    return _row_top_two(flat, offsets, np.int64(0))
