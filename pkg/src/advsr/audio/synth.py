"""
Synthetic speaker corpus.

Each synthetic speaker owns a fixed acoustic profile (pitch, formants, harmonic
weights, breathiness) drawn deterministically from (seed, speaker index). Each
voice excites that profile with its own seeded jitter, noise and amplitude
envelope, so speakers stay separable while no two voices are identical.
"""
from functools import lru_cache
from typing import Dict, List, Optional
from urllib.parse import parse_qs, urlencode, urlparse

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.signal import lfilter

from advsr.audio.manifest import DatasetManifest
from advsr.audio.waveform import Waveform, quantize_pcm16
from advsr.logging_config import get_data_logger

logger = get_data_logger()

SYNTH_SCHEME = "synth"
N_HARMONICS = 40


class SyntheticSpeakerSpec(BaseModel):
    """Parameters of a synthetic speaker corpus"""
    model_config = ConfigDict(extra="forbid", frozen=True)

    n_speakers: int = Field(10, ge=1)
    voices_per_speaker: int = Field(30, ge=1)
    duration_s: float = Field(1.0, gt=0)
    sample_rate: int = Field(16000, gt=0)
    seed: int = Field(0, ge=0)
    n_imposters: int = Field(5, ge=0)
    # voices per speaker held out for the test / train-test roles; default a third,
    # none when a speaker has a single voice
    n_test_per_speaker: Optional[int] = Field(None, ge=1)
    # leading ("top") voices per speaker used for enrollment
    n_enroll_per_speaker: Optional[int] = Field(None, ge=1)

    @model_validator(mode="after")
    def _check_split(self):
        if self.test_count >= self.voices_per_speaker:
            raise ValueError(
                f"n_test_per_speaker ({self.test_count}) must be < voices_per_speaker ({self.voices_per_speaker})")
        if self.enroll_count > self.voices_per_speaker - self.test_count:
            raise ValueError(
                f"n_enroll_per_speaker ({self.enroll_count}) exceeds the "
                f"{self.voices_per_speaker - self.test_count} non-test voices per speaker")
        return self

    @property
    def test_count(self) -> int:
        if self.n_test_per_speaker is not None:
            return self.n_test_per_speaker
        return min(self.voices_per_speaker - 1, max(1, self.voices_per_speaker // 3))

    @property
    def enroll_count(self) -> int:
        if self.n_enroll_per_speaker is not None:
            return self.n_enroll_per_speaker
        return max(1, min(5, self.voices_per_speaker - self.test_count))


class SpeakerProfile(BaseModel):
    """Fixed acoustic identity of one synthetic speaker"""
    model_config = ConfigDict(frozen=True)

    f0: float
    formants: List[float]
    bandwidths: List[float]
    harmonic_weights: List[float]
    tilt: float
    breathiness: float


def speaker_profile(seed: int, speaker_index: int) -> SpeakerProfile:
    rng = np.random.default_rng([seed, speaker_index, 0])
    return SpeakerProfile(
        f0=float(rng.uniform(85.0, 260.0)),
        formants=[float(rng.uniform(300.0, 900.0)),
                  float(rng.uniform(950.0, 2300.0)),
                  float(rng.uniform(2400.0, 3600.0))],
        bandwidths=[float(rng.uniform(60.0, 120.0)),
                    float(rng.uniform(80.0, 160.0)),
                    float(rng.uniform(120.0, 250.0))],
        harmonic_weights=rng.uniform(0.3, 1.0, size=N_HARMONICS).tolist(),
        tilt=float(rng.uniform(0.6, 1.4)),
        breathiness=float(rng.uniform(0.01, 0.08)),
    )


def _resonator(signal: np.ndarray, freq: float, bandwidth: float, sample_rate: int) -> np.ndarray:
    r = np.exp(-np.pi * bandwidth / sample_rate)
    a = [1.0, -2.0 * r * np.cos(2.0 * np.pi * freq / sample_rate), r * r]
    return lfilter([1.0 - r], a, signal)


def synth_voice(seed: int, speaker_index: int, voice_index: int,
                duration_s: float, sample_rate: int) -> Waveform:
    """Render one voice of one synthetic speaker"""
    profile = speaker_profile(seed, speaker_index)
    rng = np.random.default_rng([seed, speaker_index, voice_index + 1])
    n = max(1, int(round(duration_s * sample_rate)))
    t = np.arange(n) / sample_rate

    # pitch contour: slow drift + vibrato + per-voice offset
    drift = np.cumsum(rng.normal(0.0, 1.0, n)) / np.sqrt(n) * 0.03
    vibrato = 0.01 * np.sin(2 * np.pi * rng.uniform(4.0, 6.0) * t + rng.uniform(0, 2 * np.pi))
    f0 = profile.f0 * (1.0 + rng.uniform(-0.04, 0.04) + drift + vibrato)
    phase = 2.0 * np.pi * np.cumsum(f0) / sample_rate

    source = np.zeros(n)
    nyquist = 0.9 * sample_rate / 2
    for h in range(1, N_HARMONICS + 1):
        if h * profile.f0 >= nyquist:
            break
        amp = profile.harmonic_weights[h - 1] / h ** profile.tilt
        source += amp * np.sin(h * phase + rng.uniform(0, 2 * np.pi))
    source += profile.breathiness * rng.uniform(0.5, 1.5) * rng.normal(0.0, 1.0, n)

    voiced = source
    for freq, bw in zip(profile.formants, profile.bandwidths):
        voiced = _resonator(voiced, freq * rng.uniform(0.97, 1.03), bw, sample_rate)

    rate = rng.uniform(2.0, 5.0)
    envelope = 0.6 + 0.4 * np.abs(np.sin(np.pi * rate * t + rng.uniform(0, np.pi)))
    ramp = min(n, int(0.02 * sample_rate)) or 1
    envelope[:ramp] *= np.linspace(0.0, 1.0, ramp)
    envelope[n - ramp:] *= np.linspace(1.0, 0.0, ramp)
    voiced = voiced * envelope

    peak = np.max(np.abs(voiced))
    if peak > 0:
        voiced = voiced / peak * rng.uniform(0.3, 0.6)
    return Waveform(np.clip(voiced, -1.0, 1.0), sample_rate)


def synth_ref(seed: int, speaker_index: int, voice_index: int, duration_s: float, sample_rate: int) -> str:
    """Voice reference that resolves by re-rendering the voice"""
    query = urlencode({'duration_s': repr(float(duration_s)), 'sample_rate': int(sample_rate)})
    return f"{SYNTH_SCHEME}://{seed}/{speaker_index}/{voice_index}?{query}"


@lru_cache(maxsize=4096)
def resolve_synth_ref(ref: str) -> Waveform:
    """Render the voice a synth:// reference points at, on the PCM16 grid"""
    parsed = urlparse(ref)
    if parsed.scheme != SYNTH_SCHEME:
        raise ValueError(f"not a synthetic voice reference: {ref}")
    try:
        seed = int(parsed.netloc)
        speaker_index, voice_index = (int(p) for p in parsed.path.strip('/').split('/'))
        query = parse_qs(parsed.query)
        duration_s = float(query['duration_s'][0])
        sample_rate = int(query['sample_rate'][0])
    except (KeyError, ValueError) as e:
        raise ValueError(f"malformed synthetic voice reference: {ref}") from e
    return quantize_pcm16(synth_voice(seed, speaker_index, voice_index, duration_s, sample_rate))


def synth_corpus(spec: SyntheticSpeakerSpec) -> Dict[str, DatasetManifest]:
    """
    Build the train / train-test / enroll / test / imposter manifests of a
    synthetic corpus. Enroll and test share speakers; imposters are extra
    speakers never enrolled.

    Raises:
        ValueError: fewer than two speakers (unusable for classification)
    """
    if spec.n_speakers < 2:
        raise ValueError(f"at least 2 speakers are required for classification, got {spec.n_speakers}")

    def ref(speaker_index: int, voice_index: int) -> str:
        return synth_ref(spec.seed, speaker_index, voice_index, spec.duration_s, spec.sample_rate)

    n_train = spec.voices_per_speaker - spec.test_count
    train, held_out, enroll, imposter = {}, {}, {}, {}
    for s in range(spec.n_speakers):
        speaker_id = f"spk{s:02d}"
        voices = [ref(s, v) for v in range(spec.voices_per_speaker)]
        train[speaker_id] = voices[:n_train]
        held_out[speaker_id] = voices[n_train:]
        enroll[speaker_id] = voices[:spec.enroll_count]
    for j in range(spec.n_imposters):
        imposter[f"imp{j:02d}"] = [ref(spec.n_speakers + j, v) for v in range(max(1, spec.test_count))]

    manifests = {
        'train': DatasetManifest(role='train', seed=spec.seed, entries=train),
        'enroll': DatasetManifest(role='enroll', seed=spec.seed, entries=enroll),
    }
    if spec.test_count:
        manifests['train-test'] = DatasetManifest(role='train-test', seed=spec.seed, entries=held_out)
        manifests['test'] = DatasetManifest(role='test', seed=spec.seed, entries=dict(held_out))
    else:
        logger.warning("one voice per speaker: no test / train-test manifests")
    if imposter:
        manifests['imposter'] = DatasetManifest(role='imposter', seed=spec.seed, entries=imposter)

    logger.info(f"Synthetic corpus: {spec.n_speakers} speakers x {spec.voices_per_speaker} voices, "
                f"{spec.n_imposters} imposters, seed={spec.seed}")
    return manifests
