"""Counter-based random streams.

Every stochastic routine in this package draws from a Philox-4x64 generator
keyed by ``(seed, trial)`` and advanced to a ``position``:

* key word 0 = the experiment seed, key word 1 = the trial index;
* ``position`` counts uniform doubles already consumed.  One double consumes
  one 64-bit output word; Philox emits 4 such words per counter step, so
  seeking is: advance the counter by position // 4, then discard position % 4
  doubles (verified against numpy's buffering in the tests);
* symbols are produced by inverse-CDF lookup on those uniforms.

Because the state is (seed, trial, position) and nothing else, any trial of
any experiment can be regenerated in isolation, in any order, on any machine,
and the scheme is reproducible from the description above without reference
to this implementation.
"""

from __future__ import annotations

import numpy as np

__all__ = ["philox_generator", "uniforms"]


def philox_generator(seed: int, trial: int = 0, position: int = 0) -> np.random.Generator:
    """Generator for the (seed, trial) stream, fast-forwarded by ``position`` draws."""
    if seed < 0 or trial < 0 or position < 0:
        raise ValueError("seed, trial and position must be nonnegative")
    bg = np.random.Philox(key=np.array([seed, trial], dtype=np.uint64))
    steps, rem = divmod(position, 4)
    if steps:
        bg.advance(steps)
    gen = np.random.Generator(bg)
    if rem:
        gen.random(rem)
    return gen


def uniforms(seed: int, trial: int, position: int, n: int) -> np.ndarray:
    """The n uniforms at offsets position .. position+n-1 of the stream."""
    return philox_generator(seed, trial, position).random(n)
