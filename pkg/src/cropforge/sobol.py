"""Gray-code Sobol low-discrepancy sequence, dimensions up to 64.

Direction numbers derive from the embedded Joe-Kuo tables
(:mod:`cropforge._sobol_tables`, regenerated by
tools/generate_sobol_tables.py). The emitted sequence skips the degenerate
all-zeros initial point, so the first 1-d values are 0.5, 0.75, 0.25, ...
"""

from __future__ import annotations

import numpy as np

from ._sobol_tables import INITIAL_M, MAX_DIMENSION, POLYNOMIALS

N_BITS = 32
_SCALE = float(2**N_BITS)


def _direction_integers(poly: int, m_init: tuple[int, ...]) -> list[int]:
    """32 direction integers v_k = m_k * 2^(32-k) for one dimension."""
    degree = poly.bit_length() - 1
    m = list(m_init)
    if degree == 0:  # first dimension: van der Corput in base 2
        m = [1] * N_BITS
    while len(m) < N_BITS:
        k = len(m)
        new = m[k - degree] ^ (m[k - degree] << degree)
        for i in range(1, degree):
            if (poly >> (degree - i)) & 1:
                new ^= m[k - i] << i
        m.append(new)
    return [m[k] << (N_BITS - (k + 1)) for k in range(N_BITS)]


class SobolSequence:
    """Stateful point emitter over [0, 1)^dimension."""

    def __init__(self, dimension: int):
        if not 1 <= dimension <= MAX_DIMENSION:
            raise ValueError(
                f"dimension {dimension} outside 1..{MAX_DIMENSION} "
                "(direction-number table limit)")
        self.dimension = dimension
        self.index = 0  # count of points emitted so far
        self._v = [_direction_integers(POLYNOMIALS[j], INITIAL_M[j])
                   for j in range(dimension)]
        self._state = [0] * dimension

    def next_point(self) -> np.ndarray:
        """Next point of the sequence (the all-zeros point is skipped)."""
        if self.index >= 2**N_BITS - 1:
            raise ValueError("Sobol sequence exhausted (2^32 points)")
        # position of the lowest zero bit of the underlying counter
        n = self.index
        c = 0
        while n & 1:
            n >>= 1
            c += 1
        state = self._state
        v = self._v
        for j in range(self.dimension):
            state[j] ^= v[j][c]
        self.index += 1
        return np.array([s / _SCALE for s in state])

    def take(self, n: int) -> np.ndarray:
        """The next n points as an (n, dimension) array."""
        return np.vstack([self.next_point() for _ in range(n)])


def sobol_next(seq: SobolSequence) -> np.ndarray:
    return seq.next_point()
