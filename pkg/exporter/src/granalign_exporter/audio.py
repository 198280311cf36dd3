"""Audio loading.

Only WAV input is supported; the loader normalises everything to a
mono float64 signal at 16 kHz so the backends can assume one format.
"""

from __future__ import annotations

import wave

import numpy as np

from .errors import AudioError

SAMPLE_RATE = 16000


def load_audio(path: str) -> np.ndarray:
    """Read a WAV file as mono float64 samples at 16 kHz.

    Stereo input is averaged across channels. Input at other sample
    rates is resampled by linear interpolation, which is adequate for
    feature extraction at 20 ms hops.
    """
    try:
        with wave.open(path, "rb") as handle:
            n_channels = handle.getnchannels()
            sample_width = handle.getsampwidth()
            rate = handle.getframerate()
            n_frames = handle.getnframes()
            raw = handle.readframes(n_frames)
    except (OSError, wave.Error, EOFError) as exc:
        raise AudioError(f"cannot read audio file {path!r}: {exc}") from exc

    if sample_width != 2:
        raise AudioError(
            f"unsupported sample width {sample_width * 8} bits in {path!r}; "
            "only 16-bit PCM is supported"
        )
    if n_channels < 1:
        raise AudioError(f"no channels in {path!r}")

    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    if n_channels > 1:
        usable = (samples.size // n_channels) * n_channels
        samples = samples[:usable].reshape(-1, n_channels).mean(axis=1)

    if samples.size == 0:
        raise AudioError(f"no samples in {path!r}")

    if rate != SAMPLE_RATE:
        if rate <= 0:
            raise AudioError(f"invalid sample rate {rate} in {path!r}")
        duration_s = samples.size / rate
        n_out = int(round(duration_s * SAMPLE_RATE))
        if n_out < 1:
            raise AudioError(f"audio in {path!r} is too short to resample")
        src_t = np.arange(samples.size) / rate
        dst_t = np.arange(n_out) / SAMPLE_RATE
        samples = np.interp(dst_t, src_t, samples)

    return samples
