import numpy as np
import pytest

from objpert.noise import RngStream, as_generator, exponential_vector, gaussian_vector, laplace_vector


def test_zero_scale_gives_zeros():
    assert gaussian_vector(3, 0.0, RngStream(1)).tolist() == [0.0, 0.0, 0.0]
    assert laplace_vector(3, 0.0, RngStream(1)).tolist() == [0.0, 0.0, 0.0]


def test_stream_replay_is_bit_identical():
    a = gaussian_vector(5, 1.0, RngStream(1, 0))
    b = gaussian_vector(5, 1.0, RngStream(1, 0))
    assert a.tobytes() == b.tobytes()


def test_distinct_indices_differ():
    a = gaussian_vector(5, 1.0, RngStream(1, 0))
    b = gaussian_vector(5, 1.0, RngStream(1, 1))
    assert not np.array_equal(a, b)
    assert RngStream(1, 0).substream(3) == RngStream(1, 0).substream(3)
    assert RngStream(1, 0).substream(3) != RngStream(1, 0).substream(4)


def test_generator_is_consumed_sequentially():
    gen = np.random.default_rng(0)
    a = exponential_vector(2, 1.0, gen)
    b = exponential_vector(2, 1.0, gen)
    assert not np.array_equal(a, b)


@pytest.mark.parametrize("fn, arg", [(gaussian_vector, 1.0), (laplace_vector, 1.0), (exponential_vector, 1.0)])
def test_zero_dimension_rejected(fn, arg):
    with pytest.raises(ValueError):
        fn(0, arg, RngStream(0))


def test_invalid_parameters():
    with pytest.raises(ValueError):
        exponential_vector(2, 0.0, RngStream(0))
    with pytest.raises(ValueError):
        gaussian_vector(2, -1.0, RngStream(0))
    with pytest.raises(ValueError):
        laplace_vector(2, -1.0, RngStream(0))
    with pytest.raises(ValueError):
        RngStream(-1)
    with pytest.raises(TypeError):
        as_generator(3)


def test_exponential_support_and_batch_shape():
    z = exponential_vector(4, 2.0, RngStream(3), size=1000)
    assert z.shape == (1000, 4)
    assert np.all(z >= 0)


def test_exponential_second_moment():
    d = 3
    z = exponential_vector(d, 1.0, RngStream(7), size=100_000)
    assert np.mean(np.sum(z * z, axis=1)) == pytest.approx(2 * d, rel=0.02)
