"""
Training: finite-difference quasi-Newton for exact probabilities, a linear
trust-region simplex method for finite-shot losses, shot schedules, restarts
and test-set evaluation.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .circuit import Circuit
from .model import EXACT, ClassMap, ModelSpec, Sampled, angle_class_probs, loss_single

log = logging.getLogger(__name__)

QUASI_NEWTON = "quasi_newton"
DERIVATIVE_FREE = "derivative_free"
DEFAULT_H = 1e-4


# ---------------------------------------------------------------------------
# Optimizers
# ---------------------------------------------------------------------------

def finite_diff_gradient(f: Callable, theta, h: float = DEFAULT_H, vectorized: bool = False) -> np.ndarray:
    """Central differences ``(f(x + h e_i) - f(x - h e_i)) / 2h``.

    With ``vectorized=True``, ``f`` takes a (m, p) stack of points and returns m values.
    """
    if h <= 0:
        raise ValueError(f"step h must be positive, got {h}")
    theta = np.asarray(theta, dtype=float)
    steps = h * np.eye(theta.size)
    points = np.concatenate([theta + steps, theta - steps])
    if vectorized:
        values = np.asarray(f(points), dtype=float)
    else:
        values = np.array([f(x) for x in points])
    return (values[:theta.size] - values[theta.size:]) / (2 * h)


@dataclass
class Minimization:
    x: np.ndarray
    fun: float
    trace: list
    points: list
    iterations: int
    nfev: int
    status: str


def minimize_quasi_newton(f: Callable, x0, tol: float = 1e-6, max_iters: int = 200,
                          h: float = DEFAULT_H, grad: Callable | None = None) -> Minimization:
    """BFGS with an inverse-Hessian update and Armijo backtracking.

    ``grad`` defaults to central finite differences of ``f``. ``status`` is
    'converged' (gradient norm below ``tol``), 'max_iters' or
    'line_search_failed'; the best iterate is returned in every case.
    """
    grad = grad or (lambda x: finite_diff_gradient(f, x, h))
    x = np.array(x0, dtype=float)
    fx = float(f(x))
    nfev = 1
    trace, points = [fx], [x.copy()]
    status = "max_iters"
    if max_iters <= 0:
        return Minimization(x, fx, trace, points, 0, nfev, status)
    g = grad(x)
    hinv = np.eye(x.size)
    it = 0
    while it < max_iters:
        if np.linalg.norm(g) < tol:
            status = "converged"
            break
        p = -hinv @ g
        slope = g @ p
        if slope >= 0:
            hinv = np.eye(x.size)
            p, slope = -g, -(g @ g)
        step = 1.0
        while True:
            xn = x + step * p
            fn = float(f(xn))
            nfev += 1
            if fn <= fx + 1e-4 * step * slope:
                break
            step *= 0.5
            if step < 1e-12:
                break
        if step < 1e-12:
            status = "line_search_failed"
            break
        gn = grad(xn)
        s, yv = xn - x, gn - g
        sy = s @ yv
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(yv):
            if it == 0:
                hinv = (sy / (yv @ yv)) * np.eye(x.size)
            rho = 1.0 / sy
            v = np.eye(x.size) - rho * np.outer(s, yv)
            hinv = v @ hinv @ v.T + rho * np.outer(s, s)
        x, fx, g = xn, fn, gn
        it += 1
        trace.append(fx)
        points.append(x.copy())
    best = int(np.argmin(trace))
    return Minimization(points[best], trace[best], trace, points, it, nfev, status)


def minimize_derivative_free(f: Callable, x0, rhobeg: float = 0.5, rhoend: float = 1e-4,
                             max_iters: int = 1000, seed=None) -> Minimization:
    """Linear-model trust-region simplex search in the style of COBYLA (unconstrained).

    Keeps p + 1 interpolation points, fits the linear model through them,
    steps a distance ``rho`` down its gradient and halves ``rho`` when the
    step stops paying off. ``max_iters`` bounds the number of evaluations of
    ``f``. A ``seed`` rotates the initial simplex; ``None`` keeps it on the axes.
    """
    x0 = np.array(x0, dtype=float)
    n = x0.size
    trace, points = [], []

    def evaluate(x):
        v = float(f(x))
        trace.append(v)
        points.append(x.copy())
        return v

    if max_iters <= 0:
        v = evaluate(x0)
        return Minimization(x0, v, trace, points, 0, 1, "max_iters")

    if seed is None:
        basis = np.eye(n)
    else:
        basis, _ = np.linalg.qr(np.random.default_rng(seed).standard_normal((n, n)))
    rho = rhobeg
    sim = [x0]
    vals = [evaluate(x0)]
    for i in range(n):
        if len(trace) >= max_iters:
            break
        sim.append(x0 + rho * basis[:, i])
        vals.append(evaluate(sim[-1]))
    status = "max_iters"
    while len(trace) < max_iters and len(sim) == n + 1:
        b = int(np.argmin(vals))
        xb = sim[b]
        others = [j for j in range(n + 1) if j != b]
        disp = np.array([sim[j] - xb for j in others])
        dist = np.linalg.norm(disp, axis=1)
        try:
            dinv = np.linalg.inv(disp)
        except np.linalg.LinAlgError:
            dinv = None
        if dinv is not None:
            g = dinv @ np.array([vals[j] - vals[b] for j in others])
        # geometry repair: a far vertex or a flat simplex gets replaced by a
        # point at distance rho orthogonal to the opposite face
        sv = np.linalg.svd(disp / rho, compute_uv=False) if dinv is not None else [0.0]
        if dinv is None or dist.max() > 2.0 * rho or min(sv) < 0.25:
            if dinv is None:
                k = int(np.argmax(dist))
                u = np.linalg.svd(disp)[2][-1]
            else:
                k = int(np.argmax(dist)) if dist.max() > 2.0 * rho else int(np.argmax(np.linalg.norm(dinv, axis=0)))
                u = dinv[:, k] / np.linalg.norm(dinv[:, k])
                if g @ u > 0:
                    u = -u
            j = others[k]
            sim[j] = xb + rho * u
            vals[j] = evaluate(sim[j])
            continue
        gnorm = np.linalg.norm(g)
        if gnorm * rho < 1e-14 * max(1.0, abs(vals[b])):
            if rho <= rhoend:
                status = "converged"
                break
            rho = max(rho / 2, rhoend)
            continue
        d = -rho * g / gnorm
        fn = evaluate(xb + d)
        ratio = (vals[b] - fn) / (rho * gnorm)
        weight = np.abs(dinv.T @ d) * np.maximum(1.0, dist / rho)
        k = int(np.argmax(weight))
        if fn < vals[b] or weight[k] > 0:
            j = others[k]
            sim[j], vals[j] = xb + d, fn
        if ratio < 0.1:
            if rho <= rhoend:
                status = "converged"
                break
            rho = max(rho / 2, rhoend)
    best = int(np.argmin(trace))
    return Minimization(points[best], trace[best], trace, points, len(trace), len(trace), status)


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ShotSchedule:
    """Shots per run as a step function of the iteration number.

    ``steps`` holds (threshold, shots) pairs: iterations below the first
    threshold use the first shot count, and so on; the last count continues
    past its threshold.
    """

    steps: tuple = ((20, 250), (50, 500), (math.inf, 750))

    def __post_init__(self):
        steps = tuple((float(t), int(s)) for t, s in self.steps)
        if not steps:
            raise ValueError("schedule needs at least one step")
        thresholds = [t for t, _ in steps]
        if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
            raise ValueError("schedule thresholds must be strictly increasing")
        if any(s < 1 for _, s in steps):
            raise ValueError("shots per run must be >= 1")
        object.__setattr__(self, "steps", steps)

    def shots_at(self, iteration: int) -> int:
        for threshold, shots in self.steps:
            if iteration < threshold:
                return shots
        return self.steps[-1][1]

    @classmethod
    def constant(cls, shots: int) -> "ShotSchedule":
        return cls(((math.inf, shots),))


@dataclass
class TrainReport:
    loss_trace: list
    shots_trace: list
    best_theta: np.ndarray
    best_loss: float
    theta0: np.ndarray
    iterations: int
    total_shots: int
    seed: int | None
    mode: str
    optimizer: str
    status: str
    eval_seeds: list = field(default_factory=list)

    def summary(self) -> dict:
        d = asdict(self)
        for k in ("best_theta", "theta0"):
            d[k] = np.asarray(d[k]).tolist()
        d.pop("eval_seeds")
        return d


def _eval_seed(seed, iteration: int) -> int:
    entropy = [0 if seed is None else int(seed), iteration]
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


def initial_theta(num_params: int, seed) -> np.ndarray:
    """Uniform draw from (-pi, pi]^p."""
    return np.pi - np.random.default_rng(seed).uniform(0, 2 * np.pi, num_params)


def train(circuit: Circuit, class_map: ClassMap, omegas, y, mode: str = EXACT,
          optimizer: str = QUASI_NEWTON, schedule: ShotSchedule | None = None,
          max_iters: int = 200, seed=None, theta0=None, tol: float = 1e-6,
          h: float = DEFAULT_H, rhobeg: float = 0.5, rhoend: float = 1e-4) -> TrainReport:
    """One optimization trajectory over the full training set.

    ``omegas`` are encoded inputs (B, d) and ``y`` class indices. In sampled
    mode the loss at evaluation i uses ``schedule.shots_at(i)`` shots per sample;
    a quasi-Newton optimizer is refused there because finite differences of a
    shot-noise loss are meaningless.
    """
    if mode not in (EXACT, "sampled"):
        raise ValueError(f"mode must be 'exact' or 'sampled', got {mode!r}")
    if optimizer not in (QUASI_NEWTON, DERIVATIVE_FREE):
        raise ValueError(f"unknown optimizer {optimizer!r}")
    if mode == "sampled" and optimizer != DERIVATIVE_FREE:
        raise ValueError("sampled mode requires the derivative_free optimizer")
    omegas = np.asarray(omegas, dtype=float)
    y = np.asarray(y, dtype=int)
    if len(y) == 0:
        raise ValueError("training set is empty")
    schedule = schedule or ShotSchedule()
    theta0 = initial_theta(circuit.num_params, seed) if theta0 is None else np.asarray(theta0, float)

    shots_trace, eval_seeds = [], []

    def exact_loss(theta):
        return float(np.mean(loss_single(angle_class_probs(circuit, class_map, omegas, theta), y)))

    def exact_losses(thetas):
        probs = angle_class_probs(circuit, class_map, omegas, thetas[:, None, :])
        return loss_single(probs, y).mean(axis=1)

    def sampled_loss(theta):
        i = len(shots_trace)
        shots = schedule.shots_at(i)
        s = _eval_seed(seed, i)
        shots_trace.append(shots)
        eval_seeds.append(s)
        probs = angle_class_probs(circuit, class_map, omegas, theta, Sampled(shots, s))
        return float(np.mean(loss_single(probs, y)))

    if optimizer == QUASI_NEWTON:
        res = minimize_quasi_newton(
            exact_loss, theta0, tol=tol, max_iters=max_iters, h=h,
            grad=lambda x: finite_diff_gradient(exact_losses, x, h, vectorized=True))
    else:
        f = exact_loss if mode == EXACT else sampled_loss
        res = minimize_derivative_free(f, theta0, rhobeg=rhobeg, rhoend=rhoend,
                                       max_iters=max_iters, seed=seed)
    total_shots = int(sum(shots_trace) * len(y))
    report = TrainReport(
        loss_trace=list(res.trace), shots_trace=shots_trace, best_theta=np.asarray(res.x),
        best_loss=float(res.fun), theta0=theta0, iterations=res.iterations,
        total_shots=total_shots, seed=seed, mode=mode, optimizer=optimizer,
        status=res.status, eval_seeds=eval_seeds)
    log.debug("train seed=%s: best loss %.6f after %d iterations (%s)",
              seed, report.best_loss, report.iterations, report.status)
    return report


def restart_seeds(seed, restarts: int) -> list[int]:
    if restarts < 1:
        raise ValueError(f"restarts must be >= 1, got {restarts}")
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(restarts)]


def train_restarts(circuit: Circuit, class_map: ClassMap, omegas, y, restarts: int = 1,
                   seed=None, n_jobs: int | None = None, **kwargs) -> list[TrainReport]:
    """Independent trajectories from different random starts, in seed order."""
    seeds = restart_seeds(seed, restarts)
    if n_jobs and n_jobs != 1:
        from joblib import Parallel, delayed
        return Parallel(n_jobs=n_jobs)(
            delayed(train)(circuit, class_map, omegas, y, seed=s, **kwargs) for s in seeds)
    return [train(circuit, class_map, omegas, y, seed=s, **kwargs) for s in seeds]


def best_report(reports: Sequence[TrainReport]) -> TrainReport:
    return min(reports, key=lambda r: r.best_loss)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

@dataclass
class ConfusionMatrix:
    """Counts with rows = actual class, columns = predicted class."""

    counts: np.ndarray
    labels: tuple

    @property
    def accuracy(self) -> float:
        total = self.counts.sum()
        return float(np.trace(self.counts) / total) if total else float("nan")

    @classmethod
    def from_predictions(cls, actual, predicted, labels) -> "ConfusionMatrix":
        k = len(labels)
        counts = np.zeros((k, k), dtype=int)
        np.add.at(counts, (np.asarray(actual), np.asarray(predicted)), 1)
        return cls(counts, tuple(labels))

    def __str__(self):
        names = [str(label) for label in self.labels]
        w = max(6, *(len(n) for n in names), len(str(self.counts.max())))
        head = " " * w + " | " + " ".join(n.rjust(w) for n in names)
        rows = [head, "-" * len(head)]
        for n, row in zip(names, self.counts):
            rows.append(n.rjust(w) + " | " + " ".join(str(c).rjust(w) for c in row))
        return "\n".join(rows)


def evaluate(spec: ModelSpec, X, y, mode=EXACT) -> tuple[float, ConfusionMatrix]:
    """Accuracy and confusion matrix of ``spec`` on raw features ``X`` with class indices ``y``."""
    y = np.asarray(y, dtype=int)
    if len(y) == 0:
        raise ValueError("test set is empty")
    predicted = spec.predict_index(X, mode=mode)
    cm = ConfusionMatrix.from_predictions(y, predicted, spec.class_map.labels)
    return cm.accuracy, cm
