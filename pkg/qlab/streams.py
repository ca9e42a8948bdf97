"""
Deterministic random streams for the exit-time simulator.

Paths are processed in fixed-size blocks and every block draws from its own counter-based Philox
generator keyed by ``(seed, block)``. A path's draws therefore depend only on the master seed and
its index, never on how blocks are scheduled across workers.
"""

import numpy as np

DEFAULT_BLOCK_SIZE = 4096


def block_generator(seed: int, block: int) -> np.random.Generator:
    """
    Generator for one block of paths.

    :param seed: Master seed.
    :type seed: int

    :param block: Block index.
    :type block: int

    :return: Independent stream for the block.
    :rtype: numpy.random.Generator
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))


class PathStream:
    """
    The draws one path receives inside its block, replayed for the one-path simulator.

    Each simulation step of a block draws ``block_size`` exponential waits and then ``block_size``
    uniforms; the path reads the entries at its offset, so :func:`~qlab.simulate.simulate_exit`
    reproduces the batch record of the same ``(seed, path)``.
    """

    def __init__(self, seed: int, path: int, block_size: int = DEFAULT_BLOCK_SIZE):
        """
        :param seed: Master seed.
        :type seed: int

        :param path: Global path index.
        :type path: int

        :param block_size: Block size of the batch run being replayed.
        :type block_size: int
        """
        if path < 0 or block_size < 1:
            raise ValueError(f"invalid path {path!r} or block size {block_size!r}")
        block, self.offset = divmod(path, block_size)
        self.block = block
        self.block_size = block_size
        self._rng = block_generator(seed, block)

    def step(self, scale: float) -> tuple[float, float]:
        """
        :param scale: Mean of the exponential wait, 1/Ω.
        :type scale: float

        :return: ``(wait, uniform)`` for the next jump of this path.
        :rtype: tuple[float, float]
        """
        waits = self._rng.exponential(scale, self.block_size)
        uniforms = self._rng.random(self.block_size)
        return float(waits[self.offset]), float(uniforms[self.offset])


def path_stream(seed: int, path: int, block_size: int = DEFAULT_BLOCK_SIZE) -> PathStream:
    """
    Stream of one path, cut out of its block's stream.
    """
    return PathStream(seed, path, block_size)


def path_blocks(n_paths: int, block_size: int = DEFAULT_BLOCK_SIZE) -> list[tuple[int, int, int]]:
    """
    :return: ``(block, first_path, size)`` for each block covering ``n_paths`` paths.
    :rtype: list[tuple[int, int, int]]
    """
    return [(block, lo, min(block_size, n_paths - lo)) for block, lo in enumerate(range(0, n_paths, block_size))]
