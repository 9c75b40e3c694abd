"""
External encoder/decoder shim: WAV out, user command, WAV back in.

The command template carries {in} and {out} placeholders, e.g.
"sh -c 'opusenc {in} - | opusdec - {out}'".
"""
import os
import shlex
import subprocess
import tempfile
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from advsr.audio.waveform import Waveform
from advsr.audio.wav_io import read_wav, write_wav
from advsr.exceptions import AudioFormatError, CodecError
from advsr.logging_config import get_defense_logger
from advsr.transforms.base import Transform

logger = get_defense_logger()

DEFAULT_TIMEOUT_S = 60.0


def codec_timeout() -> float:
    return float(os.getenv('ADVSR_CODEC_TIMEOUT', DEFAULT_TIMEOUT_S))


def external_codec(w: Waveform, command_template: str, timeout: Optional[float] = None) -> Waveform:
    """
    Round-trip a voice through an external command; output is trimmed or
    zero-padded back to the input length.

    Raises:
        CodecError: the command failed, timed out or produced unreadable audio
    """
    if '{in}' not in command_template or '{out}' not in command_template:
        raise CodecError("codec command template needs both {in} and {out} placeholders")
    with tempfile.TemporaryDirectory(prefix='advsr-codec-') as tmp:
        src = Path(tmp) / 'in.wav'
        dst = Path(tmp) / 'out.wav'
        write_wav(w, src)
        argv = shlex.split(command_template.replace('{in}', shlex.quote(str(src)))
                           .replace('{out}', shlex.quote(str(dst))))
        try:
            proc = subprocess.run(argv, capture_output=True, timeout=timeout or codec_timeout(), check=False)
        except FileNotFoundError as e:
            raise CodecError(f"codec command not found: {argv[0]}", returncode=127) from e
        except subprocess.TimeoutExpired as e:
            raise CodecError(f"codec command timed out after {e.timeout}s: {argv[0]}") from e
        if proc.returncode != 0:
            stderr = proc.stderr.decode(errors='replace').strip()
            raise CodecError(f"codec command exited with status {proc.returncode}: {stderr}",
                             returncode=proc.returncode)
        try:
            decoded = read_wav(dst)
        except (FileNotFoundError, AudioFormatError) as e:
            raise CodecError(f"codec output unreadable: {e}") from e

    if decoded.sample_rate != w.sample_rate:
        raise CodecError(f"codec changed the sample rate {w.sample_rate} -> {decoded.sample_rate}")
    if len(decoded) != len(w):
        logger.debug(f"Codec output length {len(decoded)} re-aligned to {len(w)}")
    return decoded.fit_length(len(w))


def make_codec(command: str, timeout: Optional[float] = None) -> Transform:
    def kernel(x: torch.Tensor, sample_rate: int, generator=None) -> torch.Tensor:
        rows = x.detach().reshape(-1, x.shape[-1]).cpu().numpy()
        out = np.stack([external_codec(Waveform(row, sample_rate), command, timeout).samples for row in rows])
        return torch.as_tensor(out, dtype=x.dtype).reshape(x.shape)

    return Transform('codec', {'command': command}, kernel, differentiable=False, randomized=False)
