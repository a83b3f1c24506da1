"""Lorenz-63 ground truth and benchmark pair synthesis.

Trajectories are integrated with classical fixed-step RK4. The nine benchmark
pairs are synthesized from a master seed; see :func:`generate_pair` for the
layout of each scenario.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DivergenceError
from .rng import STREAM_IC, STREAM_NOISE, make_rng

DEFAULT_DT = 0.05
DEFAULT_TRANSIENT = 1000
DIVERGENCE_LIMIT = 1e6

SCENARIOS = ("baseline", "reconstruction", "noisy_forecast", "fewshot", "parametric")


@dataclass(frozen=True)
class LorenzParams:
    sigma: float = 10.0
    rho: float = 28.0
    beta: float = 8.0 / 3.0

    def __post_init__(self):
        for name in ("sigma", "rho", "beta"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0:
                raise ValueError(f"{name} must be finite and positive, got {value}")

    @property
    def fixed_point(self) -> tuple[float, float, float]:
        """The nontrivial equilibrium with positive x and y."""
        c = math.sqrt(self.beta * (self.rho - 1.0))
        return (c, c, self.rho - 1.0)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Read-only ``(n_steps, n_dims)`` array of states sampled every ``dt``."""

    points: np.ndarray
    dt: float = DEFAULT_DT

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts.reshape(1, -1)
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValueError(f"trajectory needs shape (n_steps, n_dims), got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("trajectory contains non-finite values")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.points
        return self.points.astype(dtype)

    def __getitem__(self, index):
        if isinstance(index, slice):
            return Trajectory(self.points[index], self.dt)
        return self.points[index]

    @property
    def x(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.points[:, 1]

    @property
    def z(self) -> np.ndarray:
        return self.points[:, 2]


def lorenz_rhs(state, params: LorenzParams = LorenzParams()) -> np.ndarray:
    x, y, z = state
    return np.array(_rhs(float(x), float(y), float(z), params.sigma, params.rho, params.beta))


def _rhs(x, y, z, sigma, rho, beta):
    return sigma * (y - x), x * (rho - z) - y, x * y - beta * z


def _rk4(x, y, z, dt, sigma, rho, beta):
    # scalar floats: ~20x faster than numpy on 3-vectors
    h = 0.5 * dt
    k1 = _rhs(x, y, z, sigma, rho, beta)
    k2 = _rhs(x + h * k1[0], y + h * k1[1], z + h * k1[2], sigma, rho, beta)
    k3 = _rhs(x + h * k2[0], y + h * k2[1], z + h * k2[2], sigma, rho, beta)
    k4 = _rhs(x + dt * k3[0], y + dt * k3[1], z + dt * k3[2], sigma, rho, beta)
    s = dt / 6.0
    return (
        x + s * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y + s * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        z + s * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
    )


def rk4_step(state, dt: float, params: LorenzParams = LorenzParams()) -> np.ndarray:
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    x, y, z = state
    return np.array(_rk4(float(x), float(y), float(z), dt, params.sigma, params.rho, params.beta))


def simulate(
    ic,
    n_steps: int,
    dt: float = DEFAULT_DT,
    params: LorenzParams = LorenzParams(),
    transient: int = 0,
) -> Trajectory:
    """Integrate from ``ic``, drop ``transient`` steps, return the next ``n_steps``.

    The initial condition itself counts as step 0, so with ``transient=0`` the
    first returned point is ``ic``.

    Raises
    ------
    DivergenceError
        If any component exceeds 1e6 in magnitude.
    """
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    if transient < 0:
        raise ValueError(f"transient must be >= 0, got {transient}")
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    x, y, z = (float(c) for c in ic)
    if not all(math.isfinite(c) for c in (x, y, z)):
        raise ValueError("initial condition must be finite")
    sigma, rho, beta = params.sigma, params.rho, params.beta
    out = np.empty((n_steps, 3))
    total = transient + n_steps
    for i in range(total):
        if i >= transient:
            out[i - transient] = (x, y, z)
        if i + 1 < total:
            x, y, z = _rk4(x, y, z, dt, sigma, rho, beta)
            if not (abs(x) < DIVERGENCE_LIMIT and abs(y) < DIVERGENCE_LIMIT and abs(z) < DIVERGENCE_LIMIT):
                raise DivergenceError(f"Lorenz integration diverged at step {i + 1} with {params}")
    return Trajectory(out, dt)


def add_noise(traj: Trajectory, noise_level: float, rng: np.random.Generator) -> Trajectory:
    """Add Gaussian noise with std ``noise_level`` times each coordinate's sample std."""
    if noise_level < 0:
        raise ValueError(f"noise_level must be >= 0, got {noise_level}")
    if noise_level == 0:
        return Trajectory(traj.points.copy(), traj.dt)
    scale = noise_level * traj.points.std(axis=0)
    noise = rng.standard_normal(traj.points.shape) * scale
    return Trajectory(traj.points + noise, traj.dt)


@dataclass(frozen=True)
class PairSpec:
    """Declarative description of one benchmark pair."""

    pair_id: int
    scenario: str
    train_lengths: tuple[int, ...]
    noise_level: float = 0.0
    rho_train: tuple[float, ...] = (28.0,)
    rho_test: float = 28.0
    init_length: int = 0
    forecast_length: int = 2000
    dt: float = DEFAULT_DT
    transient: int = DEFAULT_TRANSIENT

    def __post_init__(self):
        object.__setattr__(self, "train_lengths", tuple(int(n) for n in self.train_lengths))
        object.__setattr__(self, "rho_train", tuple(float(r) for r in self.rho_train))
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}")
        if self.pair_id not in PAIR_SCENARIOS:
            raise ValueError(f"pair_id must be in 1..9, got {self.pair_id}")
        if PAIR_SCENARIOS[self.pair_id] != self.scenario:
            raise ValueError(
                f"pair {self.pair_id} is a {PAIR_SCENARIOS[self.pair_id]} pair, not {self.scenario}"
            )
        if not self.train_lengths or min(self.train_lengths) < 2:
            raise ValueError("every training sequence needs at least 2 steps")
        if len(self.rho_train) != len(self.train_lengths):
            raise ValueError("rho_train and train_lengths must have equal length")
        if self.noise_level < 0:
            raise ValueError("noise_level must be >= 0")
        if self.scenario == "parametric":
            if len(self.train_lengths) != 3:
                raise ValueError("parametric pairs take exactly 3 training sequences")
            if self.init_length < 1:
                raise ValueError("parametric pairs need an initialization sequence")
        elif len(self.train_lengths) != 1 or self.init_length != 0:
            raise ValueError(f"{self.scenario} pairs take one training sequence and no init")
        if self.scenario != "reconstruction" and self.forecast_length < 1:
            raise ValueError("forecast_length must be >= 1")


PAIR_SCENARIOS = {
    1: "baseline",
    2: "reconstruction",
    3: "noisy_forecast",
    4: "reconstruction",
    5: "noisy_forecast",
    6: "fewshot",
    7: "fewshot",
    8: "parametric",
    9: "parametric",
}

MEDIUM_NOISE = 0.05
HIGH_NOISE = 0.20
PARAMETRIC_RHO_TRAIN = (28.0, 30.0, 32.0)


def default_pair_spec(pair_id: int) -> PairSpec:
    """The standard configuration of benchmark pair ``pair_id``."""
    long, short = (10_000,), (100,)
    table = {
        1: dict(train_lengths=long),
        2: dict(train_lengths=long, noise_level=MEDIUM_NOISE, forecast_length=0),
        3: dict(train_lengths=long, noise_level=MEDIUM_NOISE),
        4: dict(train_lengths=long, noise_level=HIGH_NOISE, forecast_length=0),
        5: dict(train_lengths=long, noise_level=HIGH_NOISE),
        6: dict(train_lengths=short),
        7: dict(train_lengths=short, noise_level=MEDIUM_NOISE),
        8: dict(train_lengths=long * 3, rho_train=PARAMETRIC_RHO_TRAIN, rho_test=31.0, init_length=100),
        9: dict(train_lengths=long * 3, rho_train=PARAMETRIC_RHO_TRAIN, rho_test=35.8, init_length=100),
    }
    if pair_id not in table:
        raise ValueError(f"pair_id must be in 1..9, got {pair_id}")
    return PairSpec(pair_id=pair_id, scenario=PAIR_SCENARIOS[pair_id], **table[pair_id])


@dataclass
class PairData:
    spec: PairSpec
    train: list[Trajectory]
    init: Trajectory | None
    truth: Trajectory
    # noise-free training data; only kept for tests and diagnostics
    train_clean: list[Trajectory] = field(default_factory=list, repr=False)


def _initial_condition(rng: np.random.Generator) -> tuple[float, float, float]:
    offset = rng.uniform(-0.5, 0.5, size=3)
    return tuple(float(v) for v in 1.0 + offset)


def generate_pair(spec: PairSpec, master_seed: int) -> PairData:
    """Synthesize the data of one benchmark pair.

    Initial conditions are ``(1, 1, 1)`` plus a uniform offset in
    ``[-0.5, 0.5)^3`` drawn from the ``(master_seed, pair_id, STREAM_IC)``
    stream, one per sequence, followed by ``spec.transient`` discarded steps.

    Layout by scenario:

    * forecasting pairs: one trajectory of ``train + forecast_length`` steps,
      split so that ``truth[0]`` is the RK4 successor of ``train[-1]``;
    * reconstruction pairs: ``truth`` is the clean version of the training
      trajectory itself;
    * parametric pairs: three training trajectories at ``rho_train`` and one
      ``init + forecast_length`` trajectory at ``rho_test``.

    Noise (stream ``STREAM_NOISE``) is applied to the observables only.
    """
    ic_rng = make_rng(master_seed, spec.pair_id, STREAM_IC)
    noise_rng = make_rng(master_seed, spec.pair_id, STREAM_NOISE)
    sim = dict(dt=spec.dt, transient=spec.transient)

    def observe(traj):
        return add_noise(traj, spec.noise_level, noise_rng)

    if spec.scenario == "parametric":
        clean = [
            simulate(_initial_condition(ic_rng), n, params=LorenzParams(rho=rho), **sim)
            for n, rho in zip(spec.train_lengths, spec.rho_train)
        ]
        test = simulate(
            _initial_condition(ic_rng),
            spec.init_length + spec.forecast_length,
            params=LorenzParams(rho=spec.rho_test),
            **sim,
        )
        return PairData(
            spec,
            train=[observe(t) for t in clean],
            init=observe(test[: spec.init_length]),
            truth=test[spec.init_length :],
            train_clean=clean,
        )

    n_train = spec.train_lengths[0]
    params = LorenzParams(rho=spec.rho_train[0])
    ic = _initial_condition(ic_rng)
    if spec.scenario == "reconstruction":
        clean = simulate(ic, n_train, params=params, **sim)
        return PairData(spec, train=[observe(clean)], init=None, truth=clean, train_clean=[clean])
    full = simulate(ic, n_train + spec.forecast_length, params=params, **sim)
    clean = full[:n_train]
    return PairData(spec, train=[observe(clean)], init=None, truth=full[n_train:], train_clean=[clean])


# -- text file format ---------------------------------------------------------

_COLS = "x,y,z"


def save_trajectory(traj: Trajectory, path: str | os.PathLike) -> None:
    """Write ``# dt=<dt> cols=x,y,z`` followed by one row per step (%.17g)."""
    cols = _COLS if traj.points.shape[1] == 3 else ",".join(f"c{i}" for i in range(traj.points.shape[1]))
    np.savetxt(path, traj.points, fmt="%.17g", header=f"dt={traj.dt!r} cols={cols}", comments="# ")


def load_trajectory(path: str | os.PathLike) -> Trajectory:
    with open(path) as fh:
        header = fh.readline().strip()
    if not header.startswith("#"):
        raise ValueError(f"{path}: missing '# dt=... cols=...' header")
    fields = dict(tok.split("=", 1) for tok in header.lstrip("#").split() if "=" in tok)
    if "dt" not in fields:
        raise ValueError(f"{path}: header has no dt field")
    points = np.loadtxt(path, comments="#", ndmin=2)
    if "cols" in fields and len(fields["cols"].split(",")) != points.shape[1]:
        raise ValueError(f"{path}: header declares {fields['cols']} but rows have {points.shape[1]} columns")
    return Trajectory(points, float(fields["dt"]))


def save_pair(data: PairData, directory: str | os.PathLike) -> list[str]:
    """Write ``train*.txt``, ``init.txt`` and ``truth.txt`` under ``directory``."""
    os.makedirs(directory, exist_ok=True)
    written = []
    if len(data.train) == 1:
        names = ["train.txt"]
    else:
        names = [f"train{i}.txt" for i in range(len(data.train))]
    for name, traj in zip(names, data.train):
        written.append(os.path.join(directory, name))
        save_trajectory(traj, written[-1])
    if data.init is not None:
        written.append(os.path.join(directory, "init.txt"))
        save_trajectory(data.init, written[-1])
    written.append(os.path.join(directory, "truth.txt"))
    save_trajectory(data.truth, written[-1])
    return written


def load_pair(spec: PairSpec, directory: str | os.PathLike) -> PairData:
    """Load pair files written by :func:`save_pair` (or supplied externally)."""
    if len(spec.train_lengths) == 1:
        names = ["train.txt"]
    else:
        names = [f"train{i}.txt" for i in range(len(spec.train_lengths))]
    required = names + (["init.txt"] if spec.init_length else []) + ["truth.txt"]
    for name in required:
        if not os.path.exists(os.path.join(directory, name)):
            raise FileNotFoundError(f"missing data file: {os.path.join(directory, name)}")
    train = [load_trajectory(os.path.join(directory, n)) for n in names]
    init = load_trajectory(os.path.join(directory, "init.txt")) if spec.init_length else None
    truth = load_trajectory(os.path.join(directory, "truth.txt"))
    return PairData(spec, train=train, init=init, truth=truth)


def stack(trajectories: Sequence[Trajectory]) -> np.ndarray:
    return np.concatenate([t.points for t in trajectories], axis=0)
