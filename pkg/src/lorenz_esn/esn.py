"""Leaky-integrator echo state network with an incremental ridge readout.

State update::

    r <- (1 - alpha) * r + alpha * tanh(W_res @ r + W_in @ x)

Indexing convention: the state obtained after consuming observation ``x_t``
is paired with the target ``x_{t+1}``. Starting from the zero state, the first
``washout + 1`` driven states are discarded; the very first one is the bare
input image ``alpha * tanh(W_in @ x_0)`` that has never passed through the
recurrent matrix. A 100-step sequence with ``washout=10`` therefore yields
``100 - 10 - 1 - 1 = 88`` training pairs.

The fitted estimator keeps the exact terminal state (after consuming
``x_{T-2}``) together with ``x_{T-1}``, so ``forecast()`` continues the
training trajectory without any warmup replay.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, replace
from functools import cached_property
from typing import Iterable, Iterator, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .errors import DegenerateMatrixError, DivergenceError, InsufficientDataError, SingularSystemError
from .rng import STREAM_POWER_ITERATION, STREAM_RESERVOIR, make_rng
from .validation import check_count, check_sequences, check_trajectory, check_vector

POWER_ITERATIONS = 60
FORECAST_LIMIT = 1e4
_CHUNK = 1024


@dataclass(frozen=True)
class ReservoirConfig:
    n_units: int = 1000
    spectral_radius: float = 1.2
    sparsity: float = 0.1
    leak_rate: float = 0.3
    input_scaling: float = 0.5
    ridge_lambda: float = 1e-7
    washout: int = 500
    seed: int = 0

    def __post_init__(self):
        check_count(self.n_units, "n_units", 1)
        check_count(self.washout, "washout", 0)
        check_count(self.seed, "seed", 0)
        if not 0 < self.sparsity <= 1:
            raise ValueError(f"sparsity must be in (0, 1], got {self.sparsity}")
        if not 0 < self.leak_rate <= 1:
            raise ValueError(f"leak_rate must be in (0, 1], got {self.leak_rate}")
        if not self.spectral_radius > 0:
            raise ValueError(f"spectral_radius must be positive, got {self.spectral_radius}")
        if not self.ridge_lambda >= 0:
            raise ValueError(f"ridge_lambda must be >= 0, got {self.ridge_lambda}")
        if not self.input_scaling >= 0:
            raise ValueError(f"input_scaling must be >= 0, got {self.input_scaling}")

    def replace(self, **changes) -> "ReservoirConfig":
        return replace(self, **changes)


class Reservoir:
    """Fixed random recurrent system.

    ``w_res`` is stored as CSR. ``dense`` is a lazily materialized exact copy;
    state updates use it only when ``use_dense`` is set, because at the
    standard density (0.1) the sparse product is several times faster.
    """

    def __init__(self, w_res, w_in: np.ndarray, config: ReservoirConfig, use_dense: bool = False):
        self.w_res = sp.csr_matrix(w_res)
        self.w_in = np.ascontiguousarray(w_in, dtype=np.float64)
        self.config = config
        self.use_dense = use_dense
        n = self.w_res.shape[0]
        if self.w_res.shape != (n, n) or self.w_in.shape[0] != n:
            raise ValueError(f"inconsistent shapes {self.w_res.shape} and {self.w_in.shape}")

    @property
    def n_units(self) -> int:
        return self.w_res.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.w_in.shape[1]

    @cached_property
    def dense(self) -> np.ndarray:
        out = self.w_res.toarray()
        out.setflags(write=False)
        return out

    @property
    def operator(self):
        return self.dense if self.use_dense else self.w_res

    def step(self, r: np.ndarray, x: np.ndarray) -> np.ndarray:
        a = self.config.leak_rate
        pre = self.operator @ r
        pre += self.w_in @ x
        np.tanh(pre, out=pre)
        pre *= a
        pre += (1.0 - a) * r
        return pre


def estimate_spectral_radius(matrix, iterations: int = POWER_ITERATIONS, seed: int = 0) -> float:
    """Power-iteration estimate of the spectral radius.

    Runs ``iterations`` normalized products from a seeded Gaussian start
    vector and returns the geometric mean of the per-step growth factors
    ``|A v| / |v|`` over the second half of the run. For a real dominant
    eigenvalue this is the usual limit. Random reservoir matrices have many
    eigenvalues of nearly maximal modulus, so a single growth factor keeps
    oscillating; averaging in log space cuts that scatter several-fold.
    """
    check_count(iterations, "iterations", 1)
    n = matrix.shape[0]
    if matrix.shape != (n, n):
        raise ValueError(f"matrix must be square, got {matrix.shape}")
    v = make_rng(seed, STREAM_POWER_ITERATION).standard_normal(n)
    v /= np.linalg.norm(v)
    first = iterations // 2 if iterations > 1 else 0
    log_growth = 0.0
    for i in range(iterations):
        w = matrix @ v
        norm_w = np.linalg.norm(w)
        if not np.isfinite(norm_w):
            raise ValueError("matrix must be finite")
        if norm_w < 1e-300:
            raise DegenerateMatrixError("power iterate vanished; matrix is (numerically) nilpotent or zero")
        if i >= first:
            log_growth += np.log(norm_w)
        v = w / norm_w
    return float(np.exp(log_growth / (iterations - first)))


def build_reservoir(config: ReservoirConfig, n_inputs: int = 3, use_dense: bool = False) -> Reservoir:
    """Draw W_res (uniform [-1, 1] at density ``sparsity``) and W_in, then rescale W_res."""
    n = config.n_units
    rng = make_rng(config.seed, STREAM_RESERVOIR)
    rows, cols = np.nonzero(rng.random((n, n)) < config.sparsity)
    vals = rng.uniform(-1.0, 1.0, size=rows.size)
    w_in = rng.uniform(-config.input_scaling, config.input_scaling, size=(n, n_inputs))
    w_res = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    if w_res.nnz == 0:
        raise DegenerateMatrixError(f"empty recurrent matrix (n_units={n}, sparsity={config.sparsity})")
    radius = estimate_spectral_radius(w_res, POWER_ITERATIONS, seed=config.seed)
    if radius < 1e-12:
        raise DegenerateMatrixError(f"spectral radius estimate {radius:.3g} too small to rescale")
    w_res = w_res * (config.spectral_radius / radius)
    return Reservoir(w_res, w_in, config, use_dense=use_dense)


def update_state(reservoir: Reservoir, r, x) -> np.ndarray:
    return reservoir.step(np.asarray(r, dtype=np.float64), np.asarray(x, dtype=np.float64))


def iter_states(reservoir: Reservoir, inputs, r0=None) -> Iterator[np.ndarray]:
    """Yield the state after each input without retaining history."""
    X = check_trajectory(inputs, n_dims=reservoir.n_inputs, name="inputs")
    r = np.zeros(reservoir.n_units) if r0 is None else check_vector(r0, reservoir.n_units, "r0")
    for x in X:
        r = reservoir.step(r, x)
        yield r


def drive(reservoir: Reservoir, inputs, r0=None) -> tuple[np.ndarray, np.ndarray]:
    """Teacher-force the reservoir; returns ``(states, r_final)`` with one row per input."""
    X = check_trajectory(inputs, n_dims=reservoir.n_inputs, name="inputs")
    states = np.empty((len(X), reservoir.n_units))
    for t, r in enumerate(iter_states(reservoir, X, r0)):
        states[t] = r
    return states, states[-1].copy()


@dataclass
class ReadoutAccumulator:
    """Running sums ``S^T S`` and ``S^T Y`` of the ridge normal equations."""

    gram: np.ndarray
    cross: np.ndarray
    n_samples: int = 0

    @classmethod
    def empty(cls, n_units: int, n_outputs: int = 3) -> "ReadoutAccumulator":
        return cls(np.zeros((n_units, n_units)), np.zeros((n_units, n_outputs)), 0)

    def add(self, states, targets) -> "ReadoutAccumulator":
        S = np.asarray(states, dtype=np.float64)
        Y = np.asarray(targets, dtype=np.float64)
        if S.ndim != 2 or Y.ndim != 2 or S.shape[0] != Y.shape[0]:
            raise ValueError(f"states {S.shape} and targets {Y.shape} do not align")
        if S.shape[0] < 1:
            raise ValueError("need at least one sample")
        if S.shape[1] != self.gram.shape[0] or Y.shape[1] != self.cross.shape[1]:
            raise ValueError(
                f"states {S.shape} / targets {Y.shape} do not match accumulator "
                f"{self.gram.shape} / {self.cross.shape}"
            )
        self.gram += S.T @ S
        self.cross += S.T @ Y
        self.n_samples += S.shape[0]
        return self

    def __add__(self, other: "ReadoutAccumulator") -> "ReadoutAccumulator":
        return ReadoutAccumulator(self.gram + other.gram, self.cross + other.cross, self.n_samples + other.n_samples)


def accumulate(acc: ReadoutAccumulator, states, targets) -> ReadoutAccumulator:
    return acc.add(states, targets)


def solve_readout(acc: ReadoutAccumulator, ridge_lambda: float) -> np.ndarray:
    """Solve ``(gram + lambda I) W = cross`` by Cholesky; returns W (n_units x n_outputs)."""
    if acc.n_samples < 1:
        raise InsufficientDataError("accumulator holds no samples")
    if ridge_lambda < 0:
        raise ValueError(f"ridge_lambda must be >= 0, got {ridge_lambda}")
    A = acc.gram + ridge_lambda * np.eye(acc.gram.shape[0])
    try:
        factor = scipy.linalg.cho_factor(A, lower=True, check_finite=True)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"normal equations not positive definite (lambda={ridge_lambda})") from exc
    w_out = scipy.linalg.cho_solve(factor, acc.cross)
    if not np.all(np.isfinite(w_out)):
        raise SingularSystemError("readout solve produced non-finite weights")
    return w_out


def drive_into(
    acc: ReadoutAccumulator,
    reservoir: Reservoir,
    inputs: np.ndarray,
    targets: np.ndarray,
    r0: np.ndarray,
    skip: int = 0,
    snapshot_steps: Iterable[int] = (),
) -> tuple[np.ndarray, dict[int, np.ndarray]]:
    """Drive over ``inputs`` and add (state, target) rows past ``skip`` to ``acc``.

    States are buffered in fixed-size chunks, so memory stays bounded by the
    chunk size. Returns the final state and copies of the states after the
    inputs at ``snapshot_steps``.
    """
    wanted = set(snapshot_steps)
    snapshots = {}
    buf = np.empty((_CHUNK, reservoir.n_units))
    fill, start = 0, skip
    r = r0
    for t in range(len(inputs)):
        r = reservoir.step(r, inputs[t])
        if t in wanted:
            snapshots[t] = r.copy()
        if t >= skip:
            buf[fill] = r
            fill += 1
            if fill == _CHUNK:
                acc.add(buf, targets[start : start + fill])
                start += fill
                fill = 0
    if fill:
        acc.add(buf[:fill], targets[start : start + fill])
    return r, snapshots


class EchoStateNetwork(BaseEstimator):
    """Echo state network forecaster for multivariate trajectories.

    Parameters mirror :class:`ReservoirConfig`. ``fit`` takes one trajectory of
    shape ``(n_steps, n_dims)``; ``fit_sequential`` chains several.

    Attributes
    ----------
    reservoir_ : Reservoir
    w_out_ : ndarray of shape (n_units, n_dims)
    terminal_state_ : ndarray of shape (n_units,)
        State after consuming the second-to-last training observation.
    terminal_input_ : ndarray of shape (n_dims,)
        Last training observation; the first forecast input.
    accumulator_ : ReadoutAccumulator
    n_samples_ : int
        Number of (state, target) pairs used by the readout.
    snapshots_ : dict
        States requested through ``snapshot_steps``, keyed by step index.
    """

    def __init__(
        self,
        n_units=1000,
        spectral_radius=1.2,
        sparsity=0.1,
        leak_rate=0.3,
        input_scaling=0.5,
        ridge_lambda=1e-7,
        washout=500,
        seed=0,
    ):
        self.n_units = n_units
        self.spectral_radius = spectral_radius
        self.sparsity = sparsity
        self.leak_rate = leak_rate
        self.input_scaling = input_scaling
        self.ridge_lambda = ridge_lambda
        self.washout = washout
        self.seed = seed

    @classmethod
    def from_config(cls, config: ReservoirConfig) -> "EchoStateNetwork":
        return cls(**asdict(config))

    @property
    def config(self) -> ReservoirConfig:
        return ReservoirConfig(**self.get_params())

    def _start(self, n_dims: int) -> ReservoirConfig:
        config = self.config
        self.reservoir_ = build_reservoir(config, n_inputs=n_dims)
        self.n_features_in_ = n_dims
        return config

    def _finish(self, acc: ReadoutAccumulator, r: np.ndarray, last: np.ndarray):
        self.accumulator_ = acc
        self.n_samples_ = acc.n_samples
        self.w_out_ = solve_readout(acc, self.ridge_lambda)
        self.terminal_state_ = r
        self.terminal_input_ = np.array(last, dtype=np.float64)
        return self

    def fit(self, X, y=None, snapshot_steps: Sequence[int] = ()):
        """Train the readout on one trajectory.

        ``snapshot_steps`` lists input indices whose post-update states should
        be kept in ``snapshots_`` (used to re-drive a tail window later).
        """
        X = check_trajectory(X)
        config = self._start(X.shape[1])
        skip = config.washout + 1
        if len(X) - 1 - skip < 1:
            raise InsufficientDataError(
                f"{len(X)} steps leave no training pairs after washout={config.washout}"
            )
        acc = ReadoutAccumulator.empty(config.n_units, X.shape[1])
        r, self.snapshots_ = drive_into(
            acc, self.reservoir_, X[:-1], X[1:], np.zeros(config.n_units), skip, snapshot_steps
        )
        return self._finish(acc, r, X[-1])

    def fit_sequential(self, sequences):
        """Train on several trajectories chained through one reservoir state.

        Each sequence starts from the previous sequence's terminal state. Only
        the first sequence is washed out; the normal-equation sums are
        accumulated across all of them.
        """
        seqs = check_sequences(sequences)
        config = self._start(seqs[0].shape[1])
        if len(seqs[0]) - 1 - (config.washout + 1) < 1:
            raise InsufficientDataError(f"first sequence too short for washout={config.washout}")
        if any(len(s) < 2 for s in seqs):
            raise InsufficientDataError("every sequence needs at least 2 steps")
        acc = ReadoutAccumulator.empty(config.n_units, seqs[0].shape[1])
        r = np.zeros(config.n_units)
        for i, X in enumerate(seqs):
            skip = config.washout + 1 if i == 0 else 0
            r, _ = drive_into(acc, self.reservoir_, X[:-1], X[1:], r, skip)
        self.snapshots_ = {}
        return self._finish(acc, r, seqs[-1][-1])

    def readout(self, r) -> np.ndarray:
        check_is_fitted(self, "w_out_")
        return r @ self.w_out_

    def forecast(self, n_steps: int, r_start=None, x_start=None) -> np.ndarray:
        """Closed-loop forecast of ``n_steps`` points.

        Defaults to continuing from the stored terminal state and last training
        observation.

        Raises
        ------
        DivergenceError
            If any forecast component exceeds 1e4 in magnitude.
        """
        check_is_fitted(self, "w_out_")
        check_count(n_steps, "n_steps", 1)
        res = self.reservoir_
        r = self.terminal_state_ if r_start is None else check_vector(r_start, res.n_units, "r_start")
        x = self.terminal_input_ if x_start is None else check_vector(x_start, res.n_inputs, "x_start")
        out = np.empty((n_steps, res.n_inputs))
        for t in range(n_steps):
            r = res.step(r, x)
            x = r @ self.w_out_
            if not np.all(np.abs(x) <= FORECAST_LIMIT):
                raise DivergenceError(f"forecast left |x| <= {FORECAST_LIMIT:g} at step {t}")
            out[t] = x
        return out

    def synchronize(self, X, r0=None) -> np.ndarray:
        """Teacher-force through ``X[:-1]`` and return the state to forecast from ``X[-1]``."""
        check_is_fitted(self, "w_out_")
        r = self.terminal_state_ if r0 is None else check_vector(r0, self.reservoir_.n_units, "r0")
        X = check_trajectory(X, n_dims=self.n_features_in_)
        if len(X) > 1:
            for r in iter_states(self.reservoir_, X[:-1], r):
                pass
        return r

    def predict(self, X, r0=None) -> np.ndarray:
        """Teacher-forced one-step predictions: row t estimates the value after ``X[t]``."""
        check_is_fitted(self, "w_out_")
        X = check_trajectory(X, n_dims=self.n_features_in_)
        out = np.empty_like(X)
        for t, r in enumerate(iter_states(self.reservoir_, X, r0)):
            out[t] = r @ self.w_out_
        return out

    def transform(self, X, r0=None) -> np.ndarray:
        """Denoise ``X`` by teacher forcing; output has the same length as ``X``.

        ``out[0]`` is ``X[0]`` (no estimate exists for it); ``out[t + 1]`` is
        the readout of the state after consuming ``X[t]``. Streaming: only
        one reservoir state is alive at a time.
        """
        check_is_fitted(self, "w_out_")
        X = check_trajectory(X, min_steps=2, n_dims=self.n_features_in_)
        out = np.empty_like(X)
        out[0] = X[0]
        for t, r in enumerate(iter_states(self.reservoir_, X[:-1], r0)):
            out[t + 1] = r @ self.w_out_
        return out

    reconstruct = transform


def fit(config: ReservoirConfig, train, **kwargs) -> EchoStateNetwork:
    return EchoStateNetwork.from_config(config).fit(train, **kwargs)


def fit_sequential(config: ReservoirConfig, trains) -> EchoStateNetwork:
    return EchoStateNetwork.from_config(config).fit_sequential(trains)


# -- serialization -------------------------------------------------------------

MODEL_FORMAT = "lorenz_esn.model"
MODEL_VERSION = 1


def save_model(model: EchoStateNetwork, path: str | os.PathLike) -> None:
    """Write a fitted model to a ``.npz`` archive (W_res in COO triplet form)."""
    check_is_fitted(model, "w_out_")
    coo = model.reservoir_.w_res.tocoo()
    header = {"format": MODEL_FORMAT, "version": MODEL_VERSION, "params": model.get_params()}
    with open(path, "wb") as fh:
        np.savez(
            fh,
            header=np.array(json.dumps(header, sort_keys=True)),
            w_res_rows=coo.row,
            w_res_cols=coo.col,
            w_res_vals=coo.data,
            w_in=model.reservoir_.w_in,
            w_out=model.w_out_,
            terminal_state=model.terminal_state_,
            terminal_input=model.terminal_input_,
            n_samples=np.array(model.n_samples_),
        )


def load_model(path: str | os.PathLike) -> EchoStateNetwork:
    with np.load(path, allow_pickle=False) as f:
        header = json.loads(str(f["header"]))
        if header.get("format") != MODEL_FORMAT:
            raise ValueError(f"{path}: not a {MODEL_FORMAT} file")
        if header.get("version") != MODEL_VERSION:
            raise ValueError(f"{path}: unsupported model version {header.get('version')}")
        model = EchoStateNetwork(**header["params"])
        n = model.n_units
        w_res = sp.csr_matrix((f["w_res_vals"], (f["w_res_rows"], f["w_res_cols"])), shape=(n, n))
        model.reservoir_ = Reservoir(w_res, f["w_in"], model.config)
        model.n_features_in_ = model.reservoir_.n_inputs
        model.w_out_ = f["w_out"]
        model.terminal_state_ = f["terminal_state"]
        model.terminal_input_ = f["terminal_input"]
        model.n_samples_ = int(f["n_samples"])
        model.accumulator_ = None
        model.snapshots_ = {}
    return model
