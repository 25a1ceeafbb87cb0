import numpy as np

from classreg.rng import SplitMix64, derive_seed, fnv1a64, mix64, normal_array, uniform_array


def test_splitmix_reference_values():
    # reference outputs of splitmix64 seeded with 1234567 (computed from the
    # recurrence with plain python integers)
    state = 1234567
    expected = []
    for _ in range(4):
        state = (state + 0x9E3779B97F4A7C15) & ((1 << 64) - 1)
        expected.append(mix64(state))
    stream = SplitMix64(1234567)
    assert [stream.next_u64() for _ in range(4)] == expected


def test_uniform_array_matches_sequential_stream():
    stream = SplitMix64(42)
    seq = np.array([stream.next_f64() for _ in range(500)])
    assert np.array_equal(uniform_array(42, 500), seq)


def test_uniform_range():
    u = uniform_array(7, 10000)
    assert np.all(u >= 0.0) and np.all(u < 1.0)


def test_normal_array_deterministic_and_sane():
    a = normal_array(3, 10001)
    b = normal_array(3, 10001)
    assert np.array_equal(a, b)
    assert abs(float(np.mean(a))) < 0.05
    assert abs(float(np.std(a)) - 1.0) < 0.05


def test_derive_seed_sensitivity():
    seeds = {
        derive_seed(0, "init", "layer0.weights"),
        derive_seed(0, "init", "layer1.weights"),
        derive_seed(1, "init", "layer0.weights"),
        derive_seed(0, "shuffle", 0),
        derive_seed(0, "shuffle", 1),
    }
    assert len(seeds) == 5


def test_fnv1a_known_value():
    # FNV-1a 64-bit test vector: empty string hashes to the offset basis
    assert fnv1a64("") == 0xCBF29CE484222325


def test_shuffle_deterministic():
    a = list(range(20))
    b = list(range(20))
    SplitMix64(9).shuffle(a)
    SplitMix64(9).shuffle(b)
    assert a == b
    assert sorted(a) == list(range(20))
    assert a != list(range(20))
