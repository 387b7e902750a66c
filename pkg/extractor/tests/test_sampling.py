"""Frame-selection rule, checked two independent ways: against a literal
transcription of the stride rule, and against the engine's `seqfusion sample`
command over a spread of (N, T) pairs."""

import subprocess

import pytest

from tsff_extractor.sampling import select_frame_indices


def transcribed_rule(N, T):
    stride = int(N / T)  # truncation toward zero; N, T positive
    return [k * stride for k in range(1, T + 1)]


def test_exhaustive_against_transcription():
    for N in range(1, 301):
        for T in range(1, N + 1):
            assert select_frame_indices(N, T) == transcribed_rule(N, T), (N, T)


def test_indices_are_valid_and_increasing():
    for N, T in [(1, 1), (7, 7), (30, 16), (144, 22), (299, 7), (300, 300)]:
        idx = select_frame_indices(N, T)
        assert len(idx) == T
        assert all(1 <= i <= N for i in idx)
        assert all(b > a for a, b in zip(idx, idx[1:]))


def test_too_few_frames_rejected():
    with pytest.raises(ValueError):
        select_frame_indices(5, 6)
    with pytest.raises(ValueError):
        select_frame_indices(10, 0)


PARITY_PAIRS = (
    [(144, 22), (1, 1), (2, 1), (3, 2), (10, 10), (11, 10), (16, 16)]
    + [(n, t) for n in (17, 30, 47, 63, 90, 128, 144, 200, 255, 300)
       for t in (1, 3, 7, 16, 22) if t <= n]
    + [(10_000, 16), (99_991, 30), (512, 511), (513, 512)]
)


def test_parity_with_engine_cli():
    assert len(PARITY_PAIRS) >= 60
    for N, T in PARITY_PAIRS:
        out = subprocess.run(
            ["seqfusion", "sample", "--frames", str(N), "--target", str(T)],
            capture_output=True, text=True, check=True)
        engine = [int(tok) for tok in out.stdout.split()]
        assert engine == select_frame_indices(N, T), (N, T)
