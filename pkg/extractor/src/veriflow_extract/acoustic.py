"""Per-clip acoustic functional extraction (6,373 dims).

Layout: 59 low-level descriptor contours (25 ms Hann frames, 10 ms hop at
16 kHz) x {contour, first difference} x 54 statistical functionals, plus
the clip duration in seconds: 59 * 2 * 54 + 1 = 6373.  The LLD set covers
energy, voicing (F0, voicing probability, jitter/shimmer/HNR proxies),
spectral shape (centroid, spread, skewness, kurtosis, entropy, flux,
psycho-acoustic sharpness, slope, four roll-offs), 26 log-mel bands and 14
MFCCs.  Everything is plain float64 numpy, so identical clips give
identical rows.

Audio is resampled to 16 kHz mono before framing (noted in the emitted
manifest).  When the optional "opensmile" backend is requested the
openSMILE toolkit computes its ComParE functional set instead; the builtin
backend is self-contained and is the default.
"""

from __future__ import annotations

import wave
from pathlib import Path

import numpy as np

from .viewio import ExtractError, read_claims, write_view

TARGET_RATE = 16000
FRAME_LEN = 400  # 25 ms
FRAME_HOP = 160  # 10 ms
N_FFT = 512
N_MELS = 26
N_MFCC = 14
N_MISC = 19
N_LLD = N_MELS + N_MFCC + N_MISC  # 59
ACOUSTIC_DIM = N_LLD * 2 * 54 + 1  # 6373


# ---------------------------------------------------------------------------
# WAV decoding and resampling


def read_wav(path: str | Path) -> tuple[np.ndarray, int]:
    """Decode an integer-PCM WAV to float64 mono in [-1, 1]."""
    try:
        with wave.open(str(path), "rb") as fh:
            rate = fh.getframerate()
            n_channels = fh.getnchannels()
            width = fh.getsampwidth()
            n_frames = fh.getnframes()
            raw = fh.readframes(n_frames)
    except (wave.Error, EOFError, OSError) as e:
        raise ExtractError(f"{path}: cannot decode WAV ({e})") from None
    if n_frames == 0:
        raise ExtractError(f"{path}: zero-length clip")
    if width == 2:
        data = np.frombuffer(raw, dtype="<i2").astype(float) / 32768.0
    elif width == 4:
        data = np.frombuffer(raw, dtype="<i4").astype(float) / 2147483648.0
    elif width == 1:
        data = (np.frombuffer(raw, dtype=np.uint8).astype(float) - 128.0) / 128.0
    else:
        raise ExtractError(f"{path}: unsupported sample width {width}")
    if n_channels > 1:
        data = data.reshape(-1, n_channels).mean(axis=1)
    return data, rate


def resample(samples: np.ndarray, rate: int, target: int = TARGET_RATE) -> np.ndarray:
    if rate == target:
        return samples
    duration = len(samples) / rate
    n_out = max(1, int(round(duration * target)))
    t_out = np.arange(n_out) / target
    t_in = np.arange(len(samples)) / rate
    return np.interp(t_out, t_in, samples)


# ---------------------------------------------------------------------------
# Low-level descriptors


def _frames(samples: np.ndarray) -> np.ndarray:
    if len(samples) < FRAME_LEN:
        samples = np.pad(samples, (0, FRAME_LEN - len(samples)))
    n = 1 + (len(samples) - FRAME_LEN) // FRAME_HOP
    idx = np.arange(FRAME_LEN)[None, :] + FRAME_HOP * np.arange(n)[:, None]
    return samples[idx]


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=float) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=float) / 2595.0) - 1.0)


def _mel_filterbank() -> np.ndarray:
    n_bins = N_FFT // 2 + 1
    freqs = np.linspace(0.0, TARGET_RATE / 2, n_bins)
    edges = _mel_to_hz(np.linspace(_hz_to_mel(0.0), _hz_to_mel(TARGET_RATE / 2), N_MELS + 2))
    bank = np.zeros((N_MELS, n_bins))
    for i in range(N_MELS):
        lo, mid, hi = edges[i], edges[i + 1], edges[i + 2]
        up = (freqs - lo) / max(mid - lo, 1e-9)
        down = (hi - freqs) / max(hi - mid, 1e-9)
        bank[i] = np.clip(np.minimum(up, down), 0.0, None)
    return bank


def _dct_matrix(n_out: int, n_in: int) -> np.ndarray:
    k = np.arange(1, n_out + 1)[:, None]  # skip the 0th coefficient
    n = np.arange(n_in)[None, :]
    mat = np.cos(np.pi * k * (2 * n + 1) / (2 * n_in))
    return mat * np.sqrt(2.0 / n_in)


_MEL_BANK = _mel_filterbank()
_DCT = _dct_matrix(N_MFCC, N_MELS)
_BIN_FREQS = np.linspace(0.0, TARGET_RATE / 2, N_FFT // 2 + 1)
# Zwicker-style sharpness weighting over critical-band-rate approximation
_BARK = 13.0 * np.arctan(0.00076 * _BIN_FREQS) + 3.5 * np.arctan((_BIN_FREQS / 7500.0) ** 2)
_SHARP_W = np.where(_BARK < 15.8, 1.0, np.exp(0.171 * (_BARK - 15.8)))

_EPS = 1e-10


def _autocorr_f0(frames: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """F0 (Hz, 0 when unvoiced) and voicing probability per frame."""
    spec = np.fft.rfft(frames, n=2 * FRAME_LEN)
    ac = np.fft.irfft(np.abs(spec) ** 2, n=2 * FRAME_LEN)[:, :FRAME_LEN]
    lag_lo = TARGET_RATE // 400  # 400 Hz
    lag_hi = TARGET_RATE // 50  # 50 Hz
    window = ac[:, lag_lo : lag_hi + 1]
    best = np.argmax(window, axis=1) + lag_lo
    r0 = np.maximum(ac[:, 0], _EPS)
    voicing = np.clip(window.max(axis=1) / r0, 0.0, 1.0)
    f0 = np.where(voicing > 0.3, TARGET_RATE / best, 0.0)
    return f0, voicing


def lld_matrix(samples: np.ndarray) -> np.ndarray:
    """(n_frames, 59) descriptor matrix in the documented fixed order."""
    frames = _frames(samples)
    windowed = frames * np.hanning(FRAME_LEN)
    spec = np.abs(np.fft.rfft(windowed, n=N_FFT))
    power = spec**2
    total = np.maximum(spec.sum(axis=1), _EPS)

    mel = np.log(_MEL_BANK @ power.T + _EPS).T  # (n, 26)
    mfcc = mel @ _DCT.T  # (n, 14)

    rms = np.sqrt(np.maximum((frames**2).mean(axis=1), 0.0))
    log_energy = np.log(rms + _EPS)
    zcr = np.mean(np.abs(np.diff(np.signbit(frames), axis=1)), axis=1)

    centroid = (spec * _BIN_FREQS).sum(axis=1) / total
    dev = _BIN_FREQS[None, :] - centroid[:, None]
    spread = np.sqrt((spec * dev**2).sum(axis=1) / total)
    safe_spread = np.maximum(spread, _EPS)
    skew = (spec * dev**3).sum(axis=1) / (total * safe_spread**3)
    kurt = (spec * dev**4).sum(axis=1) / (total * safe_spread**4)

    p = spec / total[:, None]
    entropy = -(p * np.log(p + _EPS)).sum(axis=1) / np.log(spec.shape[1])

    flux = np.zeros(len(spec))
    if len(spec) > 1:
        flux[1:] = np.linalg.norm(np.diff(spec, axis=0), axis=1)

    sharpness = (spec * _SHARP_W * _BARK).sum(axis=1) / (0.11 * total + (spec * _SHARP_W).sum(axis=1))
    freq_c = _BIN_FREQS - _BIN_FREQS.mean()
    slope = (spec * freq_c).sum(axis=1) / (freq_c**2).sum()

    cum = np.cumsum(power, axis=1)
    cum_total = np.maximum(cum[:, -1:], _EPS)
    rolloffs = [
        _BIN_FREQS[np.argmax(cum >= q * cum_total, axis=1)] for q in (0.25, 0.50, 0.75, 0.90)
    ]

    f0, voicing = _autocorr_f0(frames)
    jitter = np.zeros_like(f0)
    shimmer = np.zeros_like(rms)
    if len(f0) > 1:
        jitter[1:] = np.abs(np.diff(f0))
        shimmer[1:] = np.abs(np.diff(rms))
    hnr = 10.0 * np.log10((voicing + _EPS) / (1.0 - voicing + _EPS))

    misc = np.column_stack(
        [log_energy, zcr, f0, voicing, jitter, shimmer, hnr, centroid, spread, skew, kurt,
         entropy, flux, sharpness, slope] + rolloffs
    )
    assert misc.shape[1] == N_MISC
    return np.column_stack([mel, mfcc, misc])


# ---------------------------------------------------------------------------
# Statistical functionals (54 per contour)


def _percentile(x, q):
    return float(np.percentile(x, q))


def _lin_fit(x):
    n = len(x)
    if n < 2:
        return 0.0, float(x[0]) if n else 0.0, 0.0, 0.0, 0.0
    t = np.arange(n, dtype=float)
    slope, offset = np.polyfit(t, x, 1)
    fit = slope * t + offset
    resid = x - fit
    r = 0.0
    sx = x.std()
    if sx > 0:
        r = float(np.corrcoef(t, x)[0, 1])
    return float(slope), float(offset), float((resid**2).mean()), float(np.abs(resid).mean()), r


def _runs(mask: np.ndarray) -> list[int]:
    lengths, count = [], 0
    for m in mask:
        if m:
            count += 1
        elif count:
            lengths.append(count)
            count = 0
    if count:
        lengths.append(count)
    return lengths


def _peaks(x: np.ndarray) -> np.ndarray:
    if len(x) < 3:
        return np.array([], dtype=int)
    mid = (x[1:-1] > x[:-2]) & (x[1:-1] > x[2:]) & (x[1:-1] > x.mean())
    return np.where(mid)[0] + 1


def functionals(x: np.ndarray) -> np.ndarray:
    """54 fixed statistics of one contour; zeros for empty input."""
    out = np.zeros(54)
    n = len(x)
    if n == 0:
        return out
    x = np.asarray(x, dtype=float)
    mean = float(x.mean())
    std = float(x.std())
    out[0] = mean
    out[1] = std
    if std > 0:
        z = (x - mean) / std
        out[2] = float((z**3).mean())
        out[3] = float((z**4).mean())
    out[4] = float(x.min())
    out[5] = float(x.max())
    out[6] = out[5] - out[4]
    out[7] = float(np.argmin(x)) / n
    out[8] = float(np.argmax(x)) / n
    qs = [1, 5, 10, 25, 50, 75, 90, 95, 99]
    for i, q in enumerate(qs):
        out[9 + i] = _percentile(x, q)
    out[18] = out[14] - out[12]  # p75 - p25
    out[19] = out[15] - out[11]  # p90 - p10
    out[20] = out[17] - out[9]  # p99 - p1
    slope, offset, mse, mae, r = _lin_fit(x)
    out[21], out[22], out[23], out[24] = slope, offset, mse, mae
    d = np.diff(x)
    if len(d):
        out[25] = float(np.abs(d).mean())
        out[26] = float(d.std())
        rising = d[d > 0]
        falling = d[d < 0]
        out[27] = float(rising.mean()) if len(rising) else 0.0
        out[28] = float(falling.mean()) if len(falling) else 0.0
        out[29] = float(len(rising)) / len(d)
        out[30] = float(len(falling)) / len(d)
    above = x > mean
    out[31] = float(above.mean())
    out[32] = float((x > out[14]).mean())  # above p75
    out[33] = float((x < out[12]).mean())  # below p25
    if n > 1:
        out[34] = float(np.abs(np.diff(above.astype(int))).sum()) / (n - 1)
    peaks = _peaks(x)
    if len(peaks):
        out[35] = len(peaks) / n
        out[36] = float(x[peaks].mean())
        if len(peaks) > 1:
            gaps = np.diff(peaks).astype(float)
            out[37] = float(gaps.mean())
            out[38] = float(gaps.std())
    out[39] = float(np.sqrt((x**2).mean()))
    out[40] = float(np.abs(x).mean())
    up_runs = _runs(above)
    down_runs = _runs(~above)
    if up_runs:
        out[41] = float(np.mean(up_runs))
        out[42] = float(max(up_runs))
    if down_runs:
        out[43] = float(np.mean(down_runs))
        out[44] = float(max(down_runs))
    out[45] = float((x > out[15]).mean())  # above p90
    out[46] = float((x < out[11]).mean())  # below p10
    weights = np.abs(x).sum()
    if weights > 0:
        out[47] = float((np.arange(n) * np.abs(x)).sum() / (weights * n))
    out[48] = r
    shifted = x - x.min() + _EPS
    probs = shifted / shifted.sum()
    out[49] = float(-(probs * np.log(probs)).sum() / np.log(max(n, 2)))
    out[50] = float(np.exp(np.log(np.abs(x) + _EPS).mean()) / (np.abs(x).mean() + _EPS))
    iqr = out[18]
    if iqr > 0:
        out[51] = (out[14] + out[12] - 2 * out[13]) / iqr  # quartile skew
    d2 = np.diff(x, n=2) if n > 2 else np.array([])
    if len(d2):
        out[52] = float(np.abs(d2).mean())
        out[53] = float(d2.std())
    return out


def clip_features(samples: np.ndarray, rate: int) -> np.ndarray:
    """The full 6373-d feature vector for one decoded clip."""
    if len(samples) == 0:
        raise ExtractError("zero-length clip")
    duration = len(samples) / rate
    samples = resample(samples, rate)
    llds = lld_matrix(samples)
    parts = []
    for j in range(llds.shape[1]):
        contour = llds[:, j]
        parts.append(functionals(contour))
        parts.append(functionals(np.diff(contour)))
    parts.append(np.array([duration]))
    vec = np.concatenate(parts)
    assert vec.shape == (ACOUSTIC_DIM,)
    return vec


# ---------------------------------------------------------------------------
# Batch extraction


def _opensmile_features(path: Path) -> np.ndarray:
    try:
        import opensmile
    except ImportError:
        raise ExtractError("opensmile backend requested but the opensmile package is not installed") from None
    smile = opensmile.Smile(
        feature_set=opensmile.FeatureSet.ComParE_2016,
        feature_level=opensmile.FeatureLevel.Functionals,
    )
    vec = smile.process_file(str(path)).to_numpy().ravel().astype(float)
    if vec.shape != (ACOUSTIC_DIM,):
        raise ExtractError(f"opensmile returned {vec.shape[0]} features, expected {ACOUSTIC_DIM}")
    return vec


def acoustic_functionals(
    claims_path: str | Path,
    clips_dir: str | Path,
    out_dir: str | Path,
    view_name: str = "compare",
    backend: str = "builtin",
    strict: bool = False,
) -> tuple[Path, list[str]]:
    """Extract one 6373-d row per claim from `<claim_id>.wav` clips.

    Lenient by default: per-clip failures are collected into the returned
    error list and the run continues; strict mode fails on the first bad
    clip.  Returns (manifest path, per-clip error messages).
    """
    if backend not in ("builtin", "opensmile"):
        raise ExtractError(f"unknown acoustic backend {backend!r}")
    claims = read_claims(claims_path)
    clips_dir = Path(clips_dir)
    rows: dict[str, np.ndarray] = {}
    errors: list[str] = []
    for claim in claims:
        cid = claim["claim_id"]
        clip = clips_dir / f"{cid}.wav"
        try:
            if not clip.exists():
                raise ExtractError(f"{clip}: no such clip")
            if backend == "opensmile":
                rows[cid] = _opensmile_features(clip)
            else:
                samples, rate = read_wav(clip)
                rows[cid] = clip_features(samples, rate)
        except ExtractError as e:
            if strict:
                raise
            errors.append(str(e))
    manifest = write_view(
        out_dir,
        view_name,
        ACOUSTIC_DIM,
        rows,
        extra_manifest={"preprocessing": f"{TARGET_RATE} Hz mono", "backend": backend},
    )
    return manifest, errors
