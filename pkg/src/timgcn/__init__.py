"""Human motion prediction with a temporal inception encoder and a learnable-adjacency GCN."""

from .data import (MotionSequence, SynthSpec, TrainWindow, center_root, dct2, idct, load_motion_csv,
                   make_windows, ms_to_frames, save_motion_csv, synth_motion)
from .gcn import GcnConfig, gcn_forward, gcn_layer
from .linalg import NumericError, ShapeError, conv1d_valid, finite_diff_grad, matmul
from .model import Model, ModelConfig, predict
from .tim import PRESETS, BranchSpec, TimConfig, embedding_dim, tim_forward, tim_forward_all
from .trainer import (TrainConfig, adam_update, evaluate, grad_check, lr_at_epoch, mpjpe_eval, mpjpe_train_loss,
                      train, zero_velocity_eval)

__version__ = "0.1.0"
