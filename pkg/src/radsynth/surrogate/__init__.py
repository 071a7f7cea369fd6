from .layers import (
    BatchNorm,
    Conv2D,
    Dense,
    Dropout,
    Flatten,
    MaxPool2x2,
    ReLU,
    batchnorm_forward,
    conv2d_forward,
    dropout,
    maxpool2x2,
    relu,
)
from .model import CnnModel, build_radsynth
from .serialize import load_model, save_model
from .train import TrainConfig, TrainResult, rmse_loss, synthesize_map, train
