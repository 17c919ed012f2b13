from .cell import LstmCellParams, lstm_step
from .model import (DenseHead, EdLstmModel, ModelConfig, decode, encode, forward, backward,
                    load_model, mse_loss, predict, save_model)
from .train import Adam, Evaluation, TrainConfig, Trainer, TrainHistory, evaluate, train, trend_fraction

__all__ = [
    "Adam", "DenseHead", "EdLstmModel", "Evaluation", "LstmCellParams", "ModelConfig",
    "TrainConfig", "TrainHistory", "Trainer", "backward", "decode", "encode", "evaluate",
    "forward", "load_model", "lstm_step", "mse_loss", "predict", "save_model", "train",
    "trend_fraction",
]
