"""
advsr - adversarial examples, defenses and evaluation for speaker recognition.
"""

__version__ = "0.1.0"
