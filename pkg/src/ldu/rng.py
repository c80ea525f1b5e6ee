"""SplitMix64, a counter-based 64-bit generator with published constants.

Every random draw in the package comes from here so that a seed fixes the
whole stream independently of numpy's generator internals.  Output ``i``
(0-based) of a stream seeded with ``s`` is
``mix(s + (i + 1) * 0x9E3779B97F4A7C15 mod 2**64)`` where ``mix`` is the
Stafford variant-13 finalizer used by SplitMix64 (Steele, Lea & Flood 2014).
Because outputs are a pure function of the counter, blocks are generated
vectorised with numpy's wrapping uint64 arithmetic.
"""
import numpy as np

GOLDEN_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1

# fixed offsets for deriving sub-task seeds
OFFSET_INIT = 0
OFFSET_SHUFFLE = 0x1000
OFFSET_FLIP = 1
OFFSET_SPLIT = 2
OFFSET_HOLDOUT = 3


def derive_seed(seed, offset):
    return (int(seed) + int(offset)) & _MASK64


def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


class SplitMix64:
    """Stateful view over a SplitMix64 stream."""

    def __init__(self, seed):
        self.seed = int(seed) & _MASK64
        self.counter = 0

    def next_uint64(self, n):
        idx = np.arange(self.counter + 1, self.counter + 1 + n, dtype=np.uint64)
        self.counter += n
        with np.errstate(over="ignore"):
            z = np.uint64(self.seed) + idx * GOLDEN_GAMMA
            return _mix(z)

    def uniform(self, n):
        """``n`` doubles in [0, 1) from the top 53 bits of each output."""
        bits = self.next_uint64(n) >> np.uint64(11)
        return bits.astype(np.float64) * (1.0 / 9007199254740992.0)

    def uniform_open(self, n):
        """``n`` doubles in (0, 1]."""
        bits = self.next_uint64(n) >> np.uint64(11)
        return (bits.astype(np.float64) + 1.0) * (1.0 / 9007199254740992.0)

    def normal(self, n):
        """Standard normals by Box-Muller, consuming two outputs per pair."""
        pairs = (n + 1) // 2
        u = self.uniform_open(2 * pairs).reshape(pairs, 2)
        r = np.sqrt(-2.0 * np.log(u[:, 0]))
        theta = 2.0 * np.pi * u[:, 1]
        z = np.empty((pairs, 2))
        z[:, 0] = r * np.cos(theta)
        z[:, 1] = r * np.sin(theta)
        return z.reshape(-1)[:n]

    def permutation(self, n):
        """Permutation of ``range(n)`` by stable argsort of ``n`` random keys."""
        return np.argsort(self.next_uint64(n), kind="stable")
