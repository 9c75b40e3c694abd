from advsr.model.checkpoint import load_checkpoint, save_checkpoint
from advsr.model.enrollment import EnrollmentDB, cosine_scores, score_coss
from advsr.model.losses import LossSpec, margin, per_example_loss
from advsr.model.network import AudioNet, build_model
from advsr.model.system import (
    TASKS, Decision, SpeakerSystem, calibrate_threshold, decide, embed, enroll, forward, loss_and_input_grad,
)

__all__ = [
    'load_checkpoint', 'save_checkpoint', 'EnrollmentDB', 'cosine_scores', 'score_coss',
    'LossSpec', 'margin', 'per_example_loss', 'AudioNet', 'build_model',
    'TASKS', 'Decision', 'SpeakerSystem', 'calibrate_threshold', 'decide', 'embed', 'enroll', 'forward',
    'loss_and_input_grad',
]
