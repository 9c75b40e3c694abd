"""
16-bit PCM mono RIFF/WAVE reading and writing
"""
import os
from pathlib import Path
from typing import Union

import numpy as np
import soundfile as sf

from advsr.audio.waveform import PCM16_SCALE, Waveform, pcm16_codes
from advsr.exceptions import AudioFormatError
from advsr.logging_config import get_data_logger

logger = get_data_logger()

PathLike = Union[str, os.PathLike]


def read_wav(path: PathLike) -> Waveform:
    """
    Read a 16-bit PCM mono WAV file.

    Raises:
        FileNotFoundError: path does not exist
        AudioFormatError: malformed header, unsupported bit depth/channels, empty audio
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"WAV file not found: {path}")

    try:
        info = sf.info(str(path))
    except RuntimeError as e:
        raise AudioFormatError(f"malformed WAV header in {path}: {e}") from e

    if info.format != 'WAV':
        raise AudioFormatError(f"not a RIFF/WAVE file: {path} (format {info.format})")
    if info.channels != 1:
        raise AudioFormatError(f"unsupported channel count: {info.channels}")
    if info.subtype != 'PCM_16':
        raise AudioFormatError(f"unsupported bit depth: {info.subtype}")
    if info.frames < 1:
        raise AudioFormatError(f"empty audio: {path}")

    try:
        data, sample_rate = sf.read(str(path), dtype='int16', always_2d=False)
    except RuntimeError as e:
        raise AudioFormatError(f"cannot decode {path}: {e}") from e

    logger.debug(f"Read {path} ({info.frames} samples @ {sample_rate} Hz)")
    return Waveform(np.asarray(data, dtype=np.float64) / PCM16_SCALE, sample_rate)


def write_wav(w: Waveform, path: PathLike) -> None:
    """
    Store a waveform as 16-bit PCM mono; samples are quantized on the way out,
    so read_wav(path) == quantize_pcm16(w).

    Raises:
        OSError: the file cannot be written
    """
    try:
        sf.write(str(path), pcm16_codes(w.samples), w.sample_rate, subtype='PCM_16', format='WAV')
    except RuntimeError as e:
        raise OSError(f"cannot write WAV file {path}: {e}") from e
