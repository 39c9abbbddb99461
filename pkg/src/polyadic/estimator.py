"""
Scikit-learn style front end: ``PolyadicClassifier`` bundles encoding,
restart training and bitstring-argmax prediction behind fit/predict.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .circuit import Circuit, preset
from .encoding import DEFAULT_ALPHA, DEFAULT_Q, AngleEncoder
from .model import EXACT, ClassMap, ModelSpec, Sampled
from .train import QUASI_NEWTON, ShotSchedule, best_report, train_restarts


def resolve_circuit(circuit) -> Circuit:
    if isinstance(circuit, Circuit):
        return circuit
    if isinstance(circuit, str):
        return preset(circuit)
    raise TypeError(f"circuit must be a preset name or a Circuit, got {type(circuit).__name__}")


class PolyadicClassifier(ClassifierMixin, BaseEstimator):
    """Variational circuit classifier reading each class from one bitstring.

    Parameters
    ----------
    circuit : str or Circuit
        Preset name (``iris2q``, ``xor2q``, ``skin3q``, ``synth2q``) or a
        parametric circuit whose input slots match the feature count.
    bitstrings : sequence of str, optional
        One bitstring per class, in the order of ``classes_``. Defaults to
        ``00..0, 00..1, ...``.
    alpha, q : float
        Encoder settings; ignored when ``passthrough`` is set.
    passthrough : bool
        Feed raw features to the circuit as angles.
    mode : {"exact", "sampled"}
        Loss evaluation during training.
    optimizer : {"quasi_newton", "derivative_free"}
    restarts : int
        Independent random starts; the one with the lowest training loss wins.
    schedule : ShotSchedule, optional
        Shots per evaluation in sampled mode.
    eval_shots : int, optional
        Predict from this many shots per sample instead of exact probabilities.
    """

    def __init__(self, circuit="xor2q", bitstrings=None, alpha=DEFAULT_ALPHA, q=DEFAULT_Q,
                 passthrough=False, mode=EXACT, optimizer=QUASI_NEWTON, restarts=10,
                 max_iters=200, schedule=None, eval_shots=None, tol=1e-6,
                 random_state=None, n_jobs=None):
        self.circuit = circuit
        self.bitstrings = bitstrings
        self.alpha = alpha
        self.q = q
        self.passthrough = passthrough
        self.mode = mode
        self.optimizer = optimizer
        self.restarts = restarts
        self.max_iters = max_iters
        self.schedule = schedule
        self.eval_shots = eval_shots
        self.tol = tol
        self.random_state = random_state
        self.n_jobs = n_jobs

    def _class_map(self, circuit: Circuit) -> ClassMap:
        labels = tuple(self.classes_.tolist())
        if self.bitstrings is None:
            return ClassMap.default(labels, circuit.width)
        if len(self.bitstrings) != len(labels):
            raise ValueError(f"{len(self.bitstrings)} bitstrings for {len(labels)} classes")
        return ClassMap(labels, tuple(self.bitstrings))

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        check_classification_targets(y)
        circuit = resolve_circuit(self.circuit)
        if X.shape[1] != circuit.num_inputs:
            raise ValueError(f"circuit expects {circuit.num_inputs} features, got {X.shape[1]}")
        self.classes_, y_index = np.unique(y, return_inverse=True)
        if len(self.classes_) < 2:
            raise ValueError("need at least two classes")
        class_map = self._class_map(circuit)
        self.encoder_ = AngleEncoder(self.alpha, self.q, self.passthrough).fit(X)
        self.n_features_in_ = X.shape[1]
        schedule = self.schedule
        if isinstance(schedule, int):
            schedule = ShotSchedule.constant(schedule)
        self.reports_ = train_restarts(
            circuit, class_map, self.encoder_.transform(X), y_index,
            restarts=self.restarts, seed=self.random_state, n_jobs=self.n_jobs,
            mode=self.mode, optimizer=self.optimizer, schedule=schedule,
            max_iters=self.max_iters, tol=self.tol)
        best = best_report(self.reports_)
        self.theta_ = best.best_theta
        self.loss_ = best.best_loss
        self.spec_ = ModelSpec(circuit, class_map, self.encoder_.stats_, self.encoder_.config_,
                               self.theta_, summary=best.summary())
        return self

    def _eval_mode(self):
        return EXACT if self.eval_shots is None else Sampled(self.eval_shots, self.random_state)

    def predict_proba(self, X):
        """Estimated bitstring probabilities of each class (rows need not sum to 1)."""
        check_is_fitted(self, "spec_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return self.spec_.class_probs(X, mode=self._eval_mode())

    def predict(self, X):
        probs = self.predict_proba(X)
        return self.classes_[np.argmax(probs, axis=1)]
