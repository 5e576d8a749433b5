"""Geometry of the 5x5 cell grid.

Cells are indexed row-major: cell (r, c) -> r * 5 + c. The centre cell is
index 12. Rows 1 and 5 (indices 0..4 and 20..24) are the I/O rows used by
the XOR search; rows 2-4 (indices 5..19) hold the 15 free motors.
"""

from __future__ import annotations

import numpy as np

SIDE = 5
N_CELLS = SIDE * SIDE
CENTRE = N_CELLS // 2  # 12

ROW_TOP = slice(0, SIDE)
ROWS_FREE = slice(SIDE, 4 * SIDE)
ROW_BOTTOM = slice(4 * SIDE, N_CELLS)

N_FREE = ROWS_FREE.stop - ROWS_FREE.start  # 15


def neighbours4(n: int = SIDE) -> list[np.ndarray]:
    """Flat indices of the 4-neighbourhood of every cell of an n x n grid.

    Corner cells get 2 neighbours, edge cells 3, interior cells 4.
    """
    out = []
    for r in range(n):
        for c in range(n):
            idx = []
            if r > 0:
                idx.append((r - 1) * n + c)
            if r < n - 1:
                idx.append((r + 1) * n + c)
            if c > 0:
                idx.append(r * n + c - 1)
            if c < n - 1:
                idx.append(r * n + c + 1)
            out.append(np.array(idx, dtype=np.intp))
    return out


OTHERS = np.array([i for i in range(N_CELLS) if i != CENTRE], dtype=np.intp)
