import numpy as np

MAX_SEED = 2**64 - 1


def derive_seed(seed: int, *keys: int) -> int:
    """Hash a master seed and a key path into an independent 64-bit seed."""
    if not 0 <= int(seed) <= MAX_SEED:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    ss = np.random.SeedSequence([int(seed), *(int(k) for k in keys)])
    return int(ss.generate_state(1, np.uint64)[0])


def bit_generator(seed) -> np.random.BitGenerator:
    if isinstance(seed, np.random.BitGenerator):
        return seed
    if isinstance(seed, np.random.Generator):
        return seed.bit_generator
    return np.random.PCG64(seed)
