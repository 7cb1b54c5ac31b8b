"""End-to-end training runs: quantum consensus training, cross-validated
model selection with early stopping, baseline dispatch, and the benchmark
grid driver.

Every run consumes a single master seed; stage seeds (subsample, split,
cross-validation, data generation) derive from it by fixed offsets, and agent
initializations use ``master + agent_id``. Two runs with the same seed are
bit-identical apart from wall time.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from . import baselines, consensus, datahub, encodings, gp, qgrad, qkernels, torus
from .consensus import ConsensusTrace
from .datahub import Dataset
from .errors import ConfigError, StructureError

METHODS = ("dqgp", "full", "fact", "apx")

SET1_THETA = (0.58, 2.45, 1.88, 1.40, 0.31, 1.44)
SET2_THETA = (1.18, 2.99, 2.30, 1.88, 0.49, 0.49)

# Fixed offsets for deriving stage seeds from the master seed.
SEED_OFFSETS = {"subsample": 1, "split": 2, "cv": 3, "datagen": 4}


def derive_seed(master: int, stage: str) -> int:
    seq = np.random.SeedSequence(entropy=int(master), spawn_key=(SEED_OFFSETS[stage],))
    return int(seq.generate_state(1)[0])


@dataclass(frozen=True)
class TrainConfig:
    """Full configuration of one training run."""

    method: str = "dqgp"
    circuit: str = "hubregtsen"
    qubits: int = 3
    layers: int = 1
    observable: str = "xyz_per_qubit"
    outer_kernel: str = "gaussian"
    outer_param: float = 1.0
    delta: float = float(np.pi / 8)
    exact_shift: bool = False
    rho: float = 100.0
    lipschitz: float = 100.0
    noise_variance: float = 1e-2
    folds: int = 5
    s_max: int = 50
    patience: int = 5
    eps_pri: float | None = None  # defaults to 0.01 * sqrt(agents)
    eps_dual: float = 1e-2
    agents: int = 4
    samples: int | None = None
    test_fraction: float = 0.1
    seed: int = 0
    normalize: bool = True
    baseline_max_iters: int = 500
    baseline_grad_tol: float = 1e-4

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        positives = {
            "outer_param": self.outer_param,
            "delta": self.delta,
            "rho": self.rho,
            "lipschitz": self.lipschitz,
            "eps_dual": self.eps_dual,
        }
        for name, value in positives.items():
            if not value > 0:
                raise ConfigError(f"{name} must be positive, got {value}")
        if self.noise_variance < 0:
            raise ConfigError(f"noise_variance must be nonnegative, got {self.noise_variance}")
        if self.folds < 2:
            raise ConfigError(f"folds must be >= 2, got {self.folds}")
        if self.patience < 1 or self.s_max < 1 or self.agents < 1:
            raise ConfigError("patience, s_max, and agents must all be >= 1")
        if self.eps_pri is not None and not self.eps_pri > 0:
            raise ConfigError(f"eps_pri must be positive, got {self.eps_pri}")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError(f"test_fraction must be in (0, 1), got {self.test_fraction}")

    @property
    def effective_eps_pri(self) -> float:
        return self.eps_pri if self.eps_pri is not None else 1e-2 * float(np.sqrt(self.agents))

    def circuit_spec(self, input_dim: int) -> encodings.CircuitSpec:
        return encodings.build_circuit(self.circuit, self.qubits, self.layers, input_dim)

    def observable_set(self) -> qkernels.ObservableSet:
        return qkernels.observable_set(self.observable, self.qubits)

    def outer(self) -> qkernels.OuterKernel:
        return qkernels.OuterKernel(self.outer_kernel, self.outer_param)

    def shift_rule(self) -> qgrad.ShiftRule:
        return qgrad.ShiftRule(self.delta, self.exact_shift)


@dataclass
class RunResult:
    """Outcome of one training run on one dataset split."""

    method: str
    z_star: np.ndarray
    nlpd_test: float
    nrmse_test: float
    iterations: int
    wall_ms: float
    seed: int
    residual_trace: ConsensusTrace | None = None
    best_cv_nlpd: float | None = None

    def __post_init__(self):
        if not (np.isfinite(self.nlpd_test) and np.isfinite(self.nrmse_test)):
            raise StructureError(
                f"non-finite metrics: nlpd={self.nlpd_test}, nrmse={self.nrmse_test}"
            )


def prepare_dataset(ds: Dataset, config: TrainConfig) -> tuple[Dataset, Dataset]:
    """Subsample, split, and normalize. Normalization statistics come from the
    training split only and are then applied to the test split."""
    if config.samples is not None:
        ds = datahub.subsample(ds, config.samples, derive_seed(config.seed, "subsample"))
    train, test = datahub.train_test_split(ds, config.test_fraction, derive_seed(config.seed, "split"))
    if config.normalize:
        train, params = datahub.zscore_normalize(train)
        test = datahub.apply_normalization(test, params)
    return train, test


def ffold_cv_nlpd(kernel, X, y, folds: int, seed: int, noise_variance: float) -> float:
    """Mean per-fold NLPD under fixed hyperparameters.

    One seeded shuffle partitions the data into ``folds`` near-equal folds;
    each fold is predicted from the remaining folds. The full gram is built
    once and sliced per fold.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    if not 2 <= folds <= n:
        raise ConfigError(f"folds must be in [2, {n}], got {folds}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    fold_indices = np.array_split(order, folds)
    G = kernel.gram(X)
    diag = kernel.diag(X)
    scores = []
    for val_idx in fold_indices:
        tr_idx = np.setdiff1d(order, val_idx, assume_unique=True)
        C = G[np.ix_(tr_idx, tr_idx)] + noise_variance * np.eye(tr_idx.size)
        L, _ = gp.chol_with_jitter(C)
        alpha = cho_solve((L, True), y[tr_idx])
        k_star = G[np.ix_(tr_idx, val_idx)]
        mean = k_star.T @ alpha
        v = solve_triangular(L, k_star, lower=True)
        var = np.maximum(diag[val_idx] - np.sum(v**2, axis=0), gp.VARIANCE_FLOOR)
        scores.append(gp.nlpd(gp.Prediction(mean, var), y[val_idx]))
    return float(np.mean(scores))


@dataclass
class LoopOutcome:
    z_star: np.ndarray
    best_cv: float
    iterations: int
    trace: ConsensusTrace


def admm_training_loop(
    step_fn,
    cv_fn,
    z0: np.ndarray,
    s_max: int,
    patience: int,
    eps_pri: float,
    eps_dual: float,
    rho: float,
) -> LoopOutcome:
    """Consensus iterations with best-by-CV tracking and patience stopping.

    ``step_fn(z_prev) -> StepReport`` advances the consensus state;
    ``cv_fn(z) -> float`` scores a candidate. The loop keeps the best-scoring
    consensus point, resets the patience counter on strict improvement, and
    stops on patience exhaustion, residual passage, or the iteration budget.
    """
    best_cv = float("inf")
    z_star = np.asarray(z0, dtype=float)
    trace = ConsensusTrace(rho)
    t = 0
    s = 0
    z_prev = None
    while s < s_max and t < patience:
        report = step_fn(z_prev)
        trace.reports.append(report)
        z_prev = report.z
        score = cv_fn(report.z)
        if score < best_cv:
            best_cv = score
            z_star = report.z
            t = 0
        else:
            t += 1
        if report.r_pri <= eps_pri and report.r_dual <= eps_dual:
            break
        s += 1
    return LoopOutcome(z_star, best_cv, len(trace.reports), trace)


def dqgp_train(config: TrainConfig, ds: Dataset) -> RunResult:
    """Quantum-kernel training across agents, then full-train-set prediction.

    The final metrics always come from a GP over the whole training split at
    the selected consensus parameters, not from the per-agent partitions.
    """
    start = time.perf_counter()
    train, test = prepare_dataset(ds, config)
    partition = datahub.kdtree_split(train, config.agents)
    parts = partition.extract(train)
    spec = config.circuit_spec(train.dim)
    obs = config.observable_set()
    outer = config.outer()
    rule = config.shift_rule()
    agents, _ = consensus.init_agents(
        parts, spec.num_params, config.lipschitz, config.seed
    )

    def loss_and_grad(agent, z):
        return qgrad.quantum_nll_loss_and_grad(
            spec, agent.X, agent.y, z, rule, obs, outer, config.noise_variance
        )

    def step_fn(z_prev):
        return consensus.dr_admm_step(agents, z_prev, config.rho, loss_and_grad)

    cv_seed = derive_seed(config.seed, "cv")

    def cv_fn(z):
        kernel = qkernels.ProjectedQuantumKernel(spec, z, obs, outer)
        return ffold_cv_nlpd(kernel, train.X, train.y, config.folds, cv_seed, config.noise_variance)

    outcome = admm_training_loop(
        step_fn,
        cv_fn,
        consensus.consensus_update(agents, config.rho),
        config.s_max,
        config.patience,
        config.effective_eps_pri,
        config.eps_dual,
        config.rho,
    )
    kernel = qkernels.ProjectedQuantumKernel(spec, outcome.z_star, obs, outer)
    model = gp.fit(kernel, train.X, train.y, config.noise_variance)
    pred = gp.predict(model, test.X)
    wall_ms = (time.perf_counter() - start) * 1e3
    return RunResult(
        "dqgp",
        outcome.z_star,
        gp.nlpd(pred, test.y),
        gp.nrmse(pred, test.y),
        outcome.iterations,
        wall_ms,
        config.seed,
        residual_trace=outcome.trace,
        best_cv_nlpd=outcome.best_cv,
    )


def baseline_train(config: TrainConfig, ds: Dataset) -> RunResult:
    """Classical baseline run under the same split discipline and metrics."""
    start = time.perf_counter()
    train, test = prepare_dataset(ds, config)
    opt = baselines.OptimizerConfig(
        max_iters=config.baseline_max_iters, grad_tol=config.baseline_grad_tol
    )
    init = baselines.DEFAULT_INIT
    if config.method == "full":
        params, iterations = baselines.full_gp_train(train.X, train.y, init, opt)
        model = gp.fit(params.kernel(), train.X, train.y, params.noise_variance)
        pred = gp.predict(model, test.X)
    else:
        partition = datahub.kdtree_split(train, config.agents)
        parts = partition.extract(train)
        if config.method == "fact":
            params, iterations = baselines.fact_gp_train(parts, init, opt)
        elif config.method == "apx":
            params, iterations = baselines.apx_gp_train(
                parts,
                init,
                rho=config.rho,
                lipschitz=config.lipschitz,
                max_iters=config.baseline_max_iters,
                eps_pri=config.effective_eps_pri,
                eps_dual=config.eps_dual,
            )
        else:
            raise ConfigError(f"not a baseline method: {config.method!r}")
        experts = baselines.fit_experts(parts, params)
        pred = baselines.poe_predict(experts, test.X)
    wall_ms = (time.perf_counter() - start) * 1e3
    return RunResult(
        config.method,
        params.as_array(),
        gp.nlpd(pred, test.y),
        gp.nrmse(pred, test.y),
        iterations,
        wall_ms,
        config.seed,
    )


def run_method(config: TrainConfig, ds: Dataset) -> RunResult:
    if config.method == "dqgp":
        return dqgp_train(config, ds)
    return baseline_train(config, ds)


def synthetic_dataset(subset: str, n_samples: int, noise_variance: float, seed: int) -> Dataset:
    """Draw from the 2D quantum prior with the published parameter sets."""
    if subset == "set1":
        theta = SET1_THETA
    elif subset == "set2":
        theta = SET2_THETA
    else:
        raise ConfigError(f"unknown synthetic subset {subset!r} (use set1 or set2)")
    spec = encodings.build_hubregtsen(3, 1, 2)
    return datahub.sample_qgp_prior(spec, theta, n_samples, noise_variance, seed)


@dataclass(frozen=True)
class BenchmarkCell:
    """One (dataset, method, agent-count) cell of the results grid."""

    dataset: str  # "synthetic" | "csv" | "srtm"
    subset: str  # set1/set2, file stem, or tile name
    method: str
    agents: int
    source: str | None = None  # file path for csv/srtm cells


@dataclass
class BenchmarkRow:
    dataset: str
    subset: str
    method: str
    agents: int
    samples: int
    seed: int
    nlpd_test: float
    nrmse_test: float
    iterations: int
    wall_ms: float


RESULT_HEADER = "dataset,subset,method,M,N,seed,nlpd_test,nrmse_test,iters,wall_ms"


def cell_dataset(cell: BenchmarkCell, config: TrainConfig) -> Dataset:
    if cell.dataset == "synthetic":
        n = config.samples if config.samples is not None else 500
        return synthetic_dataset(
            cell.subset, n, config.noise_variance, derive_seed(config.seed, "datagen")
        )
    if cell.dataset == "csv":
        return datahub.load_csv(cell.source)
    if cell.dataset == "srtm":
        return datahub.load_hgt(cell.source)
    raise ConfigError(f"unknown dataset kind {cell.dataset!r}")


def run_cell(cell: BenchmarkCell, config: TrainConfig, seed: int) -> BenchmarkRow:
    cell_config = replace(config, method=cell.method, agents=cell.agents, seed=seed)
    ds = cell_dataset(cell, cell_config)
    samples = cell_config.samples if cell_config.samples is not None else ds.n
    result = run_method(cell_config, ds)
    return BenchmarkRow(
        cell.dataset,
        cell.subset,
        cell.method,
        cell.agents,
        samples,
        seed,
        result.nlpd_test,
        result.nrmse_test,
        result.iterations,
        result.wall_ms,
    )


def benchmark(
    cells: list[BenchmarkCell],
    config: TrainConfig,
    replications: int,
    seed_base: int,
    jobs: int = 1,
) -> list[BenchmarkRow]:
    """Run every cell ``replications`` times with seeds ``base..base+R-1``.

    Jobs are independent; with ``jobs > 1`` they execute in a process pool and
    the results are still merged in deterministic cell-major order.
    """
    if replications < 1:
        raise ConfigError(f"replications must be >= 1, got {replications}")
    tasks = [(cell, seed_base + r) for cell in cells for r in range(replications)]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_cell_task, [(c, config, s) for c, s in tasks]))
    else:
        rows = [run_cell(cell, config, seed) for cell, seed in tasks]
    return rows


def _run_cell_task(task):
    cell, config, seed = task
    return run_cell(cell, config, seed)


def rows_to_csv(rows: list[BenchmarkRow]) -> str:
    lines = [RESULT_HEADER]
    for r in rows:
        lines.append(
            f"{r.dataset},{r.subset},{r.method},{r.agents},{r.samples},{r.seed},"
            f"{r.nlpd_test:.6f},{r.nrmse_test:.6f},{r.iterations},{r.wall_ms:.0f}"
        )
    return "\n".join(lines) + "\n"


def summarize(rows: list[BenchmarkRow]) -> str:
    """Mean +/- std of both metrics per grid cell, in stable cell order."""
    groups: dict[tuple, list[BenchmarkRow]] = {}
    order = []
    for r in rows:
        key = (r.dataset, r.subset, r.method, r.agents, r.samples)
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(r)
    lines = ["dataset subset method M N nlpd_mean nlpd_std nrmse_mean nrmse_std runs"]
    for key in order:
        rs = groups[key]
        nlpd = np.array([r.nlpd_test for r in rs])
        nrmse = np.array([r.nrmse_test for r in rs])
        nlpd_std = float(np.std(nlpd, ddof=1)) if len(rs) > 1 else 0.0
        nrmse_std = float(np.std(nrmse, ddof=1)) if len(rs) > 1 else 0.0
        lines.append(
            f"{key[0]} {key[1]} {key[2]} {key[3]} {key[4]} "
            f"{np.mean(nlpd):.3f} {nlpd_std:.3f} {np.mean(nrmse):.3f} {nrmse_std:.3f} {len(rs)}"
        )
    return "\n".join(lines) + "\n"
