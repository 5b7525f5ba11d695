import math

from softmax import softmax


def _is_distribution(out):
    return abs(sum(out) - 1.0) < 1e-6 and all(0.0 <= v <= 1.0 for v in out)


def test_t1_small():
    out = softmax([0.0, 1.0])
    assert math.isclose(out[0], 0.2689414213699951, rel_tol=1e-9)
    assert math.isclose(out[1], 0.7310585786300049, rel_tol=1e-9)


def test_t2_symmetric():
    out = softmax([-1.0, 0.0, 1.0])
    assert math.isclose(out[0], 0.09003057317038046, rel_tol=1e-9)
    assert math.isclose(out[2], 0.6652409557748219, rel_tol=1e-9)


def test_t3_large_is_distribution():
    assert _is_distribution(softmax([1000.0, 1001.0]))


def test_t4_huge_values():
    out = softmax([10000.0, 10001.0])
    assert math.isclose(out[0], 0.2689414213699951, rel_tol=1e-9)
    assert math.isclose(out[1], 0.7310585786300049, rel_tol=1e-9)
