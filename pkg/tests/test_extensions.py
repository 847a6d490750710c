import numpy as np

from app.extensions import PAIR_STREAM, THETA_STREAM, WorkerPool, substream


def test_substreams_are_keyed():
    a = substream(5, 10).random(4)
    npt_equal = np.array_equal
    assert npt_equal(a, substream(5, 10).random(4))
    assert not npt_equal(a, substream(5, 11).random(4))
    assert not npt_equal(a, substream(6, 10).random(4))
    assert not npt_equal(a, substream(5, 10, PAIR_STREAM).random(4))
    assert not npt_equal(a, substream(5, 10, THETA_STREAM, attempt=1).random(4))


def test_worker_pool_keeps_order(app):
    pool = WorkerPool(app)
    assert app.extensions['maglab_workers'] is pool
    assert pool.map(lambda n: n * n, range(20), workers=4) == [n * n for n in range(20)]
    assert pool.map(str, [], workers=4) == []
