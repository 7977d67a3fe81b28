import numpy as np

from orthantlab import streams


def test_seed_sequence_spawn_is_idempotent():
    ss = streams.seed_sequence(42)
    a = streams.substreams(ss, 8)
    b = streams.substreams(ss, 8)
    for ga, gb in zip(a, b):
        assert np.array_equal(ga.standard_normal(16), gb.standard_normal(16))


def test_substreams_differ_from_each_other():
    gens = streams.substreams(7, 4)
    draws = [g.standard_normal(8) for g in gens]
    for i in range(4):
        for j in range(i + 1, 4):
            assert not np.array_equal(draws[i], draws[j])


def test_chunk_sizes_partition():
    sizes = streams.chunk_sizes(1_000_003, 64)
    assert len(sizes) == 64
    assert sum(sizes) == 1_000_003
    assert max(sizes) - min(sizes) <= 1


def test_run_chunks_order_is_stable():
    def work(i):
        return i * i

    seq = streams.run_chunks(work, 16, threads=1)
    par = streams.run_chunks(work, 16, threads=4)
    assert seq == par == [i * i for i in range(16)]


def test_ordered_sum_matches_sequential():
    rng = np.random.default_rng(3)
    parts = [rng.standard_normal(5) for _ in range(64)]
    total = streams.ordered_sum(parts)
    expect = parts[0].copy()
    for p in parts[1:]:
        expect = expect + p
    assert np.array_equal(total, expect)


def test_default_threads_env(monkeypatch):
    monkeypatch.setenv("ORTHANT_LAB_THREADS", "5")
    assert streams.default_threads() == 5
    monkeypatch.delenv("ORTHANT_LAB_THREADS")
    assert streams.default_threads() == 1
