import numpy as np
import pytest

from sbcert.streams import RandomStreams, as_streams


def test_same_seed_same_stream():
    a = RandomStreams(42).stream(3, 7)
    b = RandomStreams(42).stream(3, 7)
    assert np.array_equal(a.random(100), b.random(100))


def test_distinct_paths_differ():
    s = RandomStreams(42)
    x = s.stream(0).random(50)
    y = s.stream(1).random(50)
    z = s.stream(0, 1).random(50)
    assert not np.array_equal(x, y)
    assert not np.array_equal(x, z)
    assert not np.array_equal(y, z)


def test_distinct_seeds_differ():
    x = RandomStreams(1).stream(0).random(20)
    y = RandomStreams(2).stream(0).random(20)
    assert not np.array_equal(x, y)


def test_stream_is_fresh_each_call():
    s = RandomStreams(7)
    first = s.stream(5).random(10)
    again = s.stream(5).random(10)
    assert np.array_equal(first, again)


def test_path_limits():
    s = RandomStreams(0)
    with pytest.raises(ValueError):
        s.stream(1, 2, 3, 4)
    with pytest.raises(ValueError):
        s.stream(-1)
    with pytest.raises(ValueError):
        RandomStreams(-5)


def test_as_streams_accepts_seed_or_instance():
    s = RandomStreams(9)
    assert as_streams(s) is s
    assert as_streams(9).seed == 9
    assert np.array_equal(as_streams(9).stream(0).random(5),
                          s.stream(0).random(5))
