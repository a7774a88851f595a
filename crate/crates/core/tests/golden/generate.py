"""Reference log-mel and MFCC matrices computed with numpy/scipy.

Run from this directory: python3 generate.py
"""
import numpy as np
from scipy.fft import dct
from scipy.signal import get_window

SR = 16000
N_FFT = 512
HOP = 128
N_MELS = 40
FMIN = 50.0
FMAX = 7000.0
N_MFCC = 13
EPS = 1e-10


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + f / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (m / 2595.0) - 1.0)


def filterbank():
    edges = mel_to_hz(np.linspace(hz_to_mel(FMIN), hz_to_mel(FMAX), N_MELS + 2))
    freqs = np.arange(N_FFT // 2 + 1) * SR / N_FFT
    fb = np.zeros((N_MELS, freqs.size))
    for k in range(N_MELS):
        lo, mid, hi = edges[k : k + 3]
        rise = (freqs > lo) & (freqs <= mid)
        fall = (freqs > mid) & (freqs < hi)
        fb[k, rise] = (freqs[rise] - lo) / (mid - lo)
        fb[k, fall] = (hi - freqs[fall]) / (hi - mid)
    return fb


def signal():
    rng = np.random.default_rng(7)
    t = np.arange(SR // 2) / SR
    x = 0.4 * np.sin(2 * np.pi * 440.0 * t) + 0.2 * np.sin(2 * np.pi * (200.0 + 3000.0 * t) * t)
    x += 0.05 * rng.standard_normal(t.size)
    x[2000:2400] += 0.5 * np.hanning(400) * np.sin(2 * np.pi * 1800.0 * t[:400])
    return x


def main():
    x = signal()
    win = get_window("hamming", N_FFT, fftbins=True)
    n_frames = (x.size - N_FFT) // HOP + 1
    frames = np.stack([x[m * HOP : m * HOP + N_FFT] * win for m in range(n_frames)])
    power = np.abs(np.fft.rfft(frames, axis=1)) ** 2
    mel = power @ filterbank().T
    logmel = np.log1p(mel)
    mfcc = dct(np.log(EPS + mel), type=2, norm="ortho", axis=1)[:, :N_MFCC]
    np.savetxt("signal.txt", x, fmt="%.17e")
    np.savetxt("logmel.csv", logmel, fmt="%.17e", delimiter=",")
    np.savetxt("mfcc.csv", mfcc, fmt="%.17e", delimiter=",")


if __name__ == "__main__":
    main()
