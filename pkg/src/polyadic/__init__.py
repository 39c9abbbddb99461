"""Polyadic variational quantum classifier on simulated {sx, Rz, Cz} hardware."""
from .circuit import (Circuit, Const, Gate, Input, Param, PulseCount, bind, compact_gate, cz,
                      from_text, preset, pulse_count, rz, sx, to_text)
from .data import (Dataset, bayes_xor, gen_gaussian_xor, gen_synthetic4, load_csv, load_iris,
                   stratified_split, subsample_balanced)
from .encoding import AngleEncoder, EncoderConfig, EncoderStats, encode, quantile_from_epsilon
from .estimator import PolyadicClassifier
from .model import EXACT, ClassMap, ModelSpec, Sampled, class_probs, loss_batch, predict
from .passes import optimize, verify_equivalence
from .simulator import Distribution, ShotCounts, distribution, probabilities, sample, statevector
from .train import ShotSchedule, TrainReport, evaluate, train, train_restarts
from .translate import TargetGateSet, translate

__version__ = "0.1.0"
