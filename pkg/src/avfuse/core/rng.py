import numpy as np

from avfuse.exceptions import InvalidArgumentError

# PCG64 gives the same stream for the same seed on every platform numpy supports.
Rng = np.random.Generator


def make_rng(seed: int) -> Rng:
    """Seeded PCG64 generator. One instance per caller; never share across threads."""
    if not 0 <= seed < 2**64:
        raise InvalidArgumentError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(np.random.PCG64(seed))


def uniform_init(rng: Rng, fan_in: int, shape: tuple[int, ...]) -> np.ndarray:
    """Uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)]."""
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)
