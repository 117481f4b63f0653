"""Labeled sub-seeding so each random purpose gets its own stream.

A single master seed fans out into independent generators keyed by a fixed
label and an optional tuple of integers (drop index, sweep point, ...). The
derivation does not depend on call order, so components are reproducible in
isolation.
"""

import zlib

import numpy as np

LABELS = ("drop", "shadowing", "eigenbasis", "pilots", "channel", "noise", "moments")


def _label_code(label):
    return zlib.crc32(label.encode("utf-8"))


def seed_sequence(seed, label, *keys):
    if label not in LABELS:
        raise KeyError(f"unknown stream label {label!r}")
    spawn_key = (_label_code(label),) + tuple(int(k) for k in keys)
    return np.random.SeedSequence(entropy=int(seed), spawn_key=spawn_key)


def stream(seed, label, *keys):
    """Return a fresh ``numpy.random.Generator`` for ``(seed, label, *keys)``."""
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, label, *keys)))
