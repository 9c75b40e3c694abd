"""
Exception hierarchy shared by all advsr packages.
"""


class AdvsrError(Exception):
    """Base class for every error raised by advsr"""


class AudioFormatError(AdvsrError, ValueError):
    """WAV file is malformed or uses an unsupported layout"""


class FeatureError(AdvsrError, ValueError):
    """Feature extraction cannot run on the given input"""


class TransformError(AdvsrError, ValueError):
    """A defense transformation received invalid parameters"""


class CodecError(AdvsrError, RuntimeError):
    """External encoder/decoder command failed"""

    def __init__(self, message: str, returncode: int = None):
        super().__init__(message)
        self.returncode = returncode


class ModelError(AdvsrError, ValueError):
    """Invalid model input, label or enrollment state"""


class AttackError(AdvsrError, RuntimeError):
    """An attack could not be carried out"""


class ConfigError(AdvsrError, ValueError):
    """Experiment configuration is invalid or references missing files"""
