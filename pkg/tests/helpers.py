"""Shared test utilities: tone synthesis and spectrum analysis oracles.

The analysis here deliberately avoids the package's own DSP: dominant
frequency comes from a plain FFT so transform tests check against an
independent measurement.
"""

import numpy as np

from langwce.audio import AudioClip


def make_tone(freq, seconds=1.0, sample_rate=16000, amplitude=0.5, ramp_ms=5.0):
    n = round(seconds * sample_rate)
    t = np.arange(n) / sample_rate
    x = amplitude * np.sin(2 * np.pi * freq * t)
    ramp = round(ramp_ms / 1000 * sample_rate)
    if ramp and 2 * ramp < n:
        env = 0.5 - 0.5 * np.cos(np.pi * np.arange(ramp) / ramp)
        x[:ramp] *= env
        x[-ramp:] *= env[::-1]
    return AudioClip(sample_rate=sample_rate, samples=x)


def dominant_frequency(clip, fmin=50.0):
    """Peak of the FFT magnitude over the interior of the clip."""
    x = clip.samples
    margin = len(x) // 8
    seg = x[margin : len(x) - margin] if len(x) > 16 * 2 else x
    seg = seg * np.hanning(len(seg))
    spectrum = np.abs(np.fft.rfft(seg))
    freqs = np.fft.rfftfreq(len(seg), 1.0 / clip.sample_rate)
    keep = freqs >= fmin
    return float(freqs[keep][np.argmax(spectrum[keep])])
