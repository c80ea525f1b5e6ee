import numpy as np

from ldu.rng import SplitMix64

MASK = (1 << 64) - 1


def reference_splitmix64(seed, n):
    """Scalar SplitMix64 straight from the published algorithm."""
    state, out = seed, []
    for _ in range(n):
        state = (state + 0x9E3779B97F4A7C15) & MASK
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
        out.append(z ^ (z >> 31))
    return out


def test_published_test_vector():
    got = SplitMix64(1234567).next_uint64(5).tolist()
    assert got == [
        6457827717110365317,
        3203168211198807973,
        9817491932198370423,
        4593380528125082431,
        16408922859458223821,
    ]


def test_blocks_continue_the_stream():
    stream = SplitMix64(99)
    got = stream.next_uint64(3).tolist() + stream.next_uint64(4).tolist()
    assert got == reference_splitmix64(99, 7)


def test_uniform_range_and_moments():
    u = SplitMix64(5).uniform(100_000)
    assert u.min() >= 0.0 and u.max() < 1.0
    assert abs(u.mean() - 0.5) < 0.005


def test_normal_moments():
    z = SplitMix64(7).normal(100_001)
    assert z.shape == (100_001,)
    assert abs(z.mean()) < 0.02
    assert abs(z.std() - 1.0) < 0.02


def test_permutation_is_a_permutation():
    p = SplitMix64(3).permutation(1000)
    assert sorted(p.tolist()) == list(range(1000))
    assert not np.array_equal(p, np.arange(1000))
