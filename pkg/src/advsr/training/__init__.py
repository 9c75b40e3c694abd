from advsr.training.config import EpochRecord, TrainingConfig, TrainingHistory
from advsr.training.trainer import accuracy_of, adv_train, load_labelled, train

__all__ = ['EpochRecord', 'TrainingConfig', 'TrainingHistory', 'accuracy_of', 'adv_train', 'load_labelled', 'train']
