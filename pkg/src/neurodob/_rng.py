"""Named random streams derived from a single integer seed.

Every consumer of randomness asks for a stream by name, e.g.
``rng_stream(seed, "nn.init")``.  Streams with different names are
statistically independent, and adding a new consumer never shifts the
draws of an existing one.

Names in use:

* ``nn.init``      weight initialisation
* ``nn.dropout``   dropout masks during training
* ``nn.shuffle``   mini-batch order
* ``collect.excitation``  steering disturbance during data collection
* ``theorem.w``    bounded compensation sequences in stability sweeps
"""

import zlib

import numpy as np


def rng_stream(seed, name):
    key = zlib.crc32(name.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence([int(seed), key]))
