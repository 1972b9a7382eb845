"""Random-sampling falsifier: a built-in violation search.

Draws uniform samples from the input region's bounding box, keeps those
inside the polytope, and runs the suffixed network in batches. The first
sample (in draw order) with out[0] <= out[1] is a violation; exhausting
the budget yields unknown. Fully deterministic for a fixed seed.
"""

from __future__ import annotations

import time

import numpy as np

from ..errors import UnboundedInput
from ..execute import infer_many
from ..ir import TensorValue
from ..reduce import ReducedProblem, bounding_box
from .outcome import VerifierOutcome

__all__ = ["sample_falsify"]

_CHUNK = 4096


def sample_falsify(rp: ReducedProblem, budget: int, seed: int, timeout: float = 0.0) -> VerifierOutcome:
    """Search ``budget`` uniform box samples for a violation of ``rp``."""
    t0 = time.monotonic()
    deadline = t0 + timeout if timeout else None
    try:
        box = bounding_box(rp.input_polytope, rp.input_dim)
    except UnboundedInput:
        raise
    if box is None:
        # provably empty input region: nothing to sample
        return VerifierOutcome("unknown", verification_time=time.monotonic() - t0)
    lo, hi = box
    rng = np.random.default_rng(seed)
    n = rp.input_dim
    remaining = int(budget)
    while remaining > 0:
        k = min(_CHUNK, remaining)
        remaining -= k
        xs = rng.uniform(0.0, 1.0, size=(k, n)) * (hi - lo) + lo
        inside = rp.input_polytope.contains(xs)
        if np.any(inside):
            candidates = xs[inside]
            outs = infer_many(rp.network, [candidates.reshape((-1,) + tuple(rp.input_shape))])[0]
            flat = outs.reshape(outs.shape[0], -1)
            bad = flat[:, 0] <= flat[:, 1]
            if np.any(bad):
                first = int(np.argmax(bad))
                x = candidates[first]
                return VerifierOutcome(
                    "sat",
                    counterexample=TensorValue(x.reshape(rp.input_shape)),
                    verification_time=time.monotonic() - t0,
                )
        if deadline is not None and time.monotonic() > deadline:
            break
    return VerifierOutcome("unknown", verification_time=time.monotonic() - t0)
