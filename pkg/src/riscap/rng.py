"""Counter-based random streams.

Every random draw in the library is addressed by a key ``(seed, stream, index)``.
A Philox generator is built from that key, so draw ``i`` does not depend on how
many other draws were made before it or on which thread made them.
"""

import numpy as np

# stream identifiers; any distinct small integers work
CHANNEL = 1
NOISE = 2
ESTIMATE = 3
OUTER_Z = 4
OPT_Z = 5
SELECT = 6
PATTERN = 7
TRAINING = 8


def generator(seed: int, *key: int) -> np.random.Generator:
    """Independent generator addressed by ``seed`` and an integer key path."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    """Circularly-symmetric standard complex Gaussian samples, E|w|^2 = 1."""
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) * np.sqrt(0.5)


def as_generator(rng_state) -> np.random.Generator:
    """Accept a Generator, an int seed, or a ``(seed, *key)`` tuple."""
    if isinstance(rng_state, np.random.Generator):
        return rng_state
    if isinstance(rng_state, tuple):
        return generator(*rng_state)
    return generator(int(rng_state))
