import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF

# Independent RNG streams derived from one realization seed.
# A composition toggle must never change the trajectory draw, so each
# consumer owns its stream id.
STREAM_TRAJECTORY = 0
STREAM_OMEGA = 1
STREAM_WIENER = 2


def splitmix64(value):
    """Helper: SplitMix64 finalizer, a bijective 64-bit mixing function."""
    z = (int(value) + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def realization_seed(base_seed, index):
    """
    Seed of realization `index` of an experiment.

        seed_r = splitmix64(base_seed XOR splitmix64(index))

    Depends only on (base_seed, index), so adding realizations never
    changes the seeds of the existing ones.
    """
    if index < 0:
        raise ValueError(f"Realization index must be >= 0, got {index}")
    return splitmix64((int(base_seed) & MASK64) ^ splitmix64(index))


def make_rng(seed, stream):
    """Returns a fresh numpy Generator for (seed, stream)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed) & MASK64, int(stream)]))
