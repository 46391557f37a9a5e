from .layers import (
    BatchNorm,
    Conv2D,
    Dense,
    Dropout,
    Flatten,
    Layer,
    MaxPool2D,
    Parameter,
    ReLU,
    Reshape,
    Residual,
    Sequential,
    Sigmoid,
    TransposeConv2D,
    Upsample2D,
    count_parameters,
    layer_backward,
    layer_forward,
)
from .losses import bce, cross_entropy, l1, l1_mse, loss, mse
from .optim import SGD, Adam, RMSprop, make_optimizer, optimizer_step
from .checkpoint import load_parameters, save_parameters
