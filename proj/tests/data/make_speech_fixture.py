"""Synthesize the bundled 1-second speech-like fixture (source-filter model).

Glottal pulse train with a gliding F0 contour, shaped by time-varying formant
resonators for a vowel sequence, plus one fricative noise burst and short
leading/trailing silences. Entirely synthetic, so it carries no license.
"""
import sys
import wave

import numpy as np
from scipy import signal

SR = 22050
N = SR
rng = np.random.default_rng(20240607)
t = np.arange(N) / SR

# F0: rise then fall, with slight vibrato.
f0 = 115 + 70 * np.sin(np.pi * t / 1.0) ** 2 + 3 * np.sin(2 * np.pi * 5.5 * t)
phase = 2 * np.pi * np.cumsum(f0) / SR
# Rosenberg-like glottal flow derivative approximated by a skewed periodic pulse.
cyc = (phase / (2 * np.pi)) % 1.0
source = np.where(cyc < 0.6, np.sin(np.pi * cyc / 0.6) ** 2, 0.0)
source = np.diff(source, prepend=0.0)
source += 0.01 * rng.standard_normal(N)

# Vowel targets (F1, F2, F3) in Hz, interpolated across segments.
vowels = {"a": (730, 1090, 2440), "i": (270, 2290, 3010), "u": (300, 870, 2240), "e": (530, 1840, 2480)}
keys = [(0.05, "a"), (0.30, "i"), (0.55, "u"), (0.85, "e"), (0.95, "e")]
kt = np.array([k[0] for k in keys])
formants = np.stack([np.interp(t, kt, [vowels[k[1]][i] for k in keys]) for i in range(3)])
bandwidths = (80.0, 100.0, 140.0)

# Time-varying two-pole resonators, applied in 5 ms blocks with carried state.
voiced = np.zeros(N)
block = int(0.005 * SR)
states = [np.zeros(2) for _ in range(3)]
for start in range(0, N, block):
    seg = source[start:start + block]
    for i in range(3):
        fc = formants[i, start]
        r = np.exp(-np.pi * bandwidths[i] / SR)
        a = [1.0, -2 * r * np.cos(2 * np.pi * fc / SR), r * r]
        seg, states[i] = signal.lfilter([1.0 - r], a, seg, zi=states[i])
    voiced[start:start + block] = seg

# Syllable envelope with a fricative gap around 0.62-0.72 s.
env = np.clip(np.minimum((t - 0.05) / 0.03, (0.95 - t) / 0.04), 0, 1)
env *= 0.6 + 0.4 * np.sin(2 * np.pi * 3.0 * t + 0.5) ** 2
gap = (t > 0.62) & (t < 0.72)
env[gap] *= 0.05
hiss = signal.lfilter(*signal.butter(4, 3500 / (SR / 2), "high"), rng.standard_normal(N))
fric_env = np.exp(-0.5 * ((t - 0.67) / 0.02) ** 2)

x = voiced * env
x = x / np.max(np.abs(x)) * 0.6 + 0.08 * hiss * fric_env
x = x / np.max(np.abs(x)) * 0.7
pcm = np.round(x * 32768).clip(-32768, 32767).astype("<i2")

out = sys.argv[1] if len(sys.argv) > 1 else "speech_1s.wav"
with wave.open(out, "wb") as w:
    w.setnchannels(1)
    w.setsampwidth(2)
    w.setframerate(SR)
    w.writeframes(pcm.tobytes())

# A 32-frame mel array (APNA container, float64) for the synthesis shape check:
# a smooth synthetic log-mel ridge, not derived from the clip.
import struct

frames, n_mels = 32, 80
m = np.arange(n_mels)[None, :]
f = np.arange(frames)[:, None]
mel = -8.0 + 6.0 * np.exp(-0.5 * ((m - 12 - 4 * np.sin(f / 5.0)) / 6.0) ** 2)
with open(out.replace("speech_1s.wav", "mel_32frames.apna") if out.endswith("speech_1s.wav") else "mel_32frames.apna", "wb") as fh:
    fh.write(b"APNA" + struct.pack("<HBB", 1, 2, 2) + struct.pack("<QQ", frames, n_mels))
    fh.write(mel.astype("<f8").tobytes())
