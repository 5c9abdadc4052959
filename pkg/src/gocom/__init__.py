"""Goal-oriented communication at desk scale.

Train an encoder, a differentiable noisy channel, a demapper and a task
head end-to-end (classification or deep Q-learning), and compare against a
reconstruction-only JSCC baseline across SNR sweeps.
"""

import os as _os

# Desk-scale matrices: BLAS thread fan-out costs more than it buys, and
# single-threaded kernels keep reruns bitwise reproducible.  Only takes
# effect when numpy has not been imported yet; callers may override.
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    _os.environ.setdefault(_var, "1")

from .channel import ChannelConfig, ComplexBlock, normalize_power, snr_to_noise_power, transmit
from .data import Dataset, gen_synth, load_idx
from .catch import CatchEnv
from .models import (ArchSpec, DemapperModel, GoeModel, JsccModel, TaskModel,
                     build_pair, compose, make_arch, symbols_for_rate)
from .objective import (ObjectiveConfig, accuracy, combined_loss, comm_loss,
                        discounted_return, modified_reward, psnr)
from .persist import MetricsRow, load_checkpoint, save_checkpoint, write_metrics_csv
from .rl import DqnConfig, QComposition, ReplayBuffer, Transition, eval_policy, train_rl
from .supervised import (JointTrainer, SnrPolicy, TrainConfig, evaluate_sweep,
                         pretrain_task, train_jscc)
from .tensor import ParamSet, Tape, Tensor, finite_diff_check, opt_step

__version__ = "0.1.0"
