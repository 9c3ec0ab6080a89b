import zlib

import numpy as np

__all__ = ['make_rng']


def make_rng(seed: int, *names: str) -> np.random.Generator:
    """
    make_rng: create a named random stream derived from a run seed.
    Streams with different names are statistically independent, the same (seed, names) pair always
    yields the same stream.
    :param seed: the run seed.
    :param names: the stream path, e.g. ("sampler",) or ("noise", "features").
    :return: a numpy Generator.
    """
    key = tuple(zlib.crc32(name.encode('utf-8')) for name in names)
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=key))
