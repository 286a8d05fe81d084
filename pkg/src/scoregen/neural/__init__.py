from .lstm import (
    LayerParams,
    ModelConfig,
    ModelWeights,
    backward,
    backward_batch,
    dropout,
    forward,
    forward_batch,
    init_weights,
    loss,
    lstm_cell_step,
    softmax,
)
from .train import TrainConfig, accuracy, mean_loss, train
from .weights_io import dumps_weights, load_weights, loads_weights, save_weights

__all__ = [
    "LayerParams", "ModelConfig", "ModelWeights", "TrainConfig",
    "accuracy", "backward", "backward_batch", "dropout", "dumps_weights", "forward",
    "forward_batch", "init_weights", "load_weights", "loads_weights", "loss",
    "lstm_cell_step", "mean_loss", "save_weights", "softmax", "train",
]
