"""Counter-based random streams with serializable state.

All randomness flows through numpy's Philox bit generator. Streams are derived
from a master seed via SeedSequence spawn keys, so trial i of an experiment
gets an independent stream that does not depend on how many trials ran before
it (safe under parallel or out-of-order execution). Generator state round-trips
through plain JSON so a persisted audit session replays bit-identically.
"""

from __future__ import annotations

import secrets

import numpy as np

from .errors import FormatError

# Seeds are kept within uint64 so they survive JSON round-trips everywhere.
_SEED_BITS = 63


def fresh_seed() -> int:
    """Entropy-derived seed, printed by callers so runs stay reproducible."""
    return secrets.randbits(_SEED_BITS)


def master_stream(seed: int) -> np.random.Generator:
    """Root stream for a given seed."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


def split_stream(seed: int, *key) -> np.random.Generator:
    """Independent child stream of the master seed.

    Uses an explicit spawn key so the mapping (seed, key...) -> stream is
    stateless, stable, and collision-free across distinct keys.
    """
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(seq))


def child_seed(seed: int, *key) -> int:
    """Derive a serializable child seed (used to seed per-trial sessions).

    Distinct keys must yield distinct streams even when a derived seed is fed
    back into master_stream, so key channels should not be reused between
    split_stream and child_seed calls at the same level.
    """
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return int(seq.generate_state(1, np.uint64)[0] >> 1)


def stream_state(gen: np.random.Generator) -> dict:
    """JSON-safe snapshot of a Philox generator's full state."""
    state = gen.bit_generator.state
    if state.get("bit_generator") != "Philox":
        raise FormatError("only Philox generator state can be serialized")
    inner = state["state"]
    return {
        "bit_generator": "Philox",
        "counter": [int(x) for x in inner["counter"]],
        "key": [int(x) for x in inner["key"]],
        "buffer": [int(x) for x in state["buffer"]],
        "buffer_pos": int(state["buffer_pos"]),
        "has_uint32": int(state["has_uint32"]),
        "uinteger": int(state["uinteger"]),
    }


def restore_stream(state: dict) -> np.random.Generator:
    """Rebuild a generator from stream_state() output."""
    if state.get("bit_generator") != "Philox":
        raise FormatError("rng state must come from a Philox generator")
    gen = np.random.Generator(np.random.Philox())
    try:
        gen.bit_generator.state = {
            "bit_generator": "Philox",
            "state": {
                "counter": np.array(state["counter"], dtype=np.uint64),
                "key": np.array(state["key"], dtype=np.uint64),
            },
            "buffer": np.array(state["buffer"], dtype=np.uint64),
            "buffer_pos": int(state["buffer_pos"]),
            "has_uint32": int(state["has_uint32"]),
            "uinteger": int(state["uinteger"]),
        }
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed rng state: {exc}") from exc
    return gen
