"""Configuration-driven experiment runner.

A single JSON document describes the data source (synthetic spec or files),
the norms to sweep, the regularization grid, the observation fractions and
repetitions, and solver options.  For every (norm, fraction, repetition)
cell the harness fits on the train mask, selects the regularization weight
on validation MSE, and reports test MSE separately for the tensor and the
matrix.  Everything is deterministic given the config, and results.csv is
byte-identical across reruns (wall times go to a separate timings.csv).
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import baselines, datagen, norms, solver
from .solver import CompletionResult, CoupledProblem, SolverOptions
from .tensor_ops import ObservationMask, mask_apply

__all__ = [
    "ExperimentConfig",
    "ExperimentReport",
    "CellResult",
    "load_config",
    "run",
    "cross_validate",
    "load_sparse_tensor",
    "save_sparse_tensor",
    "load_matrix_csv",
    "save_matrix_csv",
    "emit_report",
]

BASELINE_IDS = ("MTN", "OTN", "SLTN", "CP")


@dataclass(frozen=True)
class LambdaGrid:
    lo: float = 0.01
    hi: float = 5.0
    count: int = 10
    scale: str = "log"  # "linear" or "log"

    def __post_init__(self):
        if self.lo <= 0 or self.hi < self.lo or self.count < 1:
            raise ValueError("lambda grid must be positive and non-empty")
        if self.scale not in ("linear", "log"):
            raise ValueError("lambda grid scale must be 'linear' or 'log'")

    def values(self) -> np.ndarray:
        if self.count == 1:
            return np.array([self.lo])
        if self.scale == "linear":
            return np.linspace(self.lo, self.hi, self.count)
        return np.geomspace(self.lo, self.hi, self.count)


@dataclass(frozen=True)
class ExperimentConfig:
    norms: tuple[str, ...]
    synthetic: datagen.SyntheticSpec | None = None
    tensor_file: str | None = None
    matrix_file: str | None = None
    matrix_fully_observed: bool = False
    lambda_grid: LambdaGrid = LambdaGrid()
    train_fractions: tuple[float, ...] = (0.3, 0.5, 0.7)
    validation_fraction: float = 0.1
    repetitions: int = 3
    seed: int = 0
    cp_rank: int = 5
    cp_iters: int = 100
    solver: SolverOptions = SolverOptions()
    # scale the ADMM proximity parameter with lambda (keeps the iteration
    # count flat across a wide regularization grid)
    beta_tracks_lambda: bool = True
    output_dir: str = "results"

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if not self.norms:
            raise ValueError("at least one norm is required")
        for n in self.norms:
            if n not in BASELINE_IDS:
                norms.parse_descriptor(n)  # raises on malformed ids
        if (self.synthetic is None) == (self.tensor_file is None):
            raise ValueError("configure exactly one of synthetic data or files")


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse the JSON config file."""
    with open(path) as fh:
        doc = json.load(fh)
    data = doc.get("data", {})
    synthetic = None
    if "synthetic" in data:
        s = dict(data["synthetic"])
        noise = s.pop("noise", "default")
        kwargs = {
            "dims": tuple(s.get("dims", (20, 20, 20))),
            "multilinear_rank": tuple(s.get("multilinear_rank", (5, 5, 5))),
            "matrix_cols": s.get("matrix_cols", 30),
            "matrix_rank": s.get("matrix_rank", 5),
            "shared": s.get("shared", 0),
            "seed": s.get("seed", doc.get("seed", 0)),
        }
        if noise == "low":
            synthetic = datagen.SyntheticSpec.low_noise(**kwargs)
        elif noise == "default":
            synthetic = datagen.SyntheticSpec(**kwargs)
        else:
            synthetic = datagen.SyntheticSpec(
                noise_mean=noise["mean"], noise_std=noise["std"], **kwargs
            )
    grid_doc = doc.get("lambda_grid", {})
    grid = LambdaGrid(
        lo=grid_doc.get("min", 0.01),
        hi=grid_doc.get("max", 5.0),
        count=grid_doc.get("count", 10),
        scale=grid_doc.get("scale", "log"),
    )
    masks = doc.get("masks", {})
    sdoc = doc.get("solver", {})
    opts = SolverOptions(
        beta=sdoc.get("beta", 1.0),
        max_iters=sdoc.get("max_iters", 2000),
        tol_primal=sdoc.get("tol_primal", 1e-6),
        tol_dual=sdoc.get("tol_dual", 1e-6),
        record_objective=False,
    )
    return ExperimentConfig(
        norms=tuple(doc["norms"]),
        synthetic=synthetic,
        tensor_file=data.get("tensor_file"),
        matrix_file=data.get("matrix_file"),
        matrix_fully_observed=data.get("matrix_fully_observed", False),
        lambda_grid=grid,
        train_fractions=tuple(masks.get("train_fractions", (0.3, 0.5, 0.7))),
        validation_fraction=masks.get("validation_fraction", 0.1),
        repetitions=doc.get("repetitions", 3),
        seed=doc.get("seed", 0),
        cp_rank=doc.get("cp_rank", 5),
        cp_iters=doc.get("cp_iters", 100),
        solver=opts,
        beta_tracks_lambda=sdoc.get("beta_tracks_lambda", True),
        output_dir=doc.get("output_dir", "results"),
    )


@dataclass
class CellResult:
    norm: str
    fraction: float
    repetition: int
    selected_lambda: float
    validation_mse: float
    test_mse_tensor: float
    test_mse_matrix: float
    iterations: int
    converged: bool
    error: str = ""
    wall_time: float = 0.0


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    cells: list[CellResult] = field(default_factory=list)

    def failures(self) -> list[CellResult]:
        return [c for c in self.cells if c.error]

    def mean_test_mse(self, norm: str, fraction: float, which: str = "tensor") -> float:
        vals = [
            getattr(c, f"test_mse_{which}")
            for c in self.cells
            if c.norm == norm and c.fraction == fraction and not c.error
        ]
        vals = [v for v in vals if not math.isnan(v)]
        return float(np.mean(vals)) if vals else float("nan")


def _mse(truth: np.ndarray, pred: np.ndarray, mask: ObservationMask) -> float:
    if len(mask) == 0:
        return float("nan")
    ix = mask.as_tuple()
    diff = truth[ix] - pred[ix]
    return float(np.mean(diff**2))


def _pooled_mse(pairs) -> float:
    """MSE pooled over several (truth, pred, mask) triples."""
    sq = 0.0
    n = 0
    for truth, pred, mask in pairs:
        if len(mask) == 0:
            continue
        ix = mask.as_tuple()
        diff = truth[ix] - pred[ix]
        sq += float(np.sum(diff**2))
        n += len(mask)
    return sq / n if n else float("nan")


def cross_validate(fits: list[tuple[float, object, float]]) -> tuple[float, object, float]:
    """Pick the grid point with the lowest validation MSE.

    ``fits`` is ``[(lam, fitted, val_mse), ...]`` in ascending lambda order;
    ties break toward larger lambda.  Raises if every fit failed (NaN MSE).
    """
    best = None
    for lam, fitted, mse in fits:
        if math.isnan(mse):
            continue
        if best is None or mse <= best[2]:
            best = (lam, fitted, mse)
    if best is None:
        raise RuntimeError("all fits failed during cross-validation")
    return best


def _cell_opts(cfg: ExperimentConfig, lam: float) -> SolverOptions:
    beta = cfg.solver.beta
    if cfg.beta_tracks_lambda:
        beta = max(lam, 1e-3) * cfg.solver.beta
    return SolverOptions(
        lam=lam, beta=beta, max_iters=cfg.solver.max_iters,
        tol_primal=cfg.solver.tol_primal, tol_dual=cfg.solver.tol_dual,
        record_objective=False,
    )


def _fit_cell(
    cfg: ExperimentConfig,
    norm_id: str,
    T: np.ndarray,
    M: np.ndarray,
    t_masks: tuple[ObservationMask, ObservationMask, ObservationMask],
    m_masks: tuple[ObservationMask, ObservationMask, ObservationMask],
    cell_seed: int = 0,
) -> tuple[float, float, float, float, int, bool]:
    """Fit one cell; returns (lambda, val_mse, test_t, test_m, iters, conv)."""
    t_train, t_val, t_test = t_masks
    m_train, m_val, m_test = m_masks
    lam_values = cfg.lambda_grid.values()
    matrix_val_counts = len(m_val) > 0

    if norm_id == "CP":
        factors = baselines.coupled_cp_als(
            T, M, t_train, m_train, rank=cfg.cp_rank, iters=cfg.cp_iters,
            seed=cell_seed,
        )
        T_hat = factors.reconstruct_tensor()
        M_hat = factors.reconstruct_matrix()
        val = _pooled_mse(
            [(T, T_hat, t_val)] + ([(M, M_hat, m_val)] if matrix_val_counts else [])
        )
        return (
            float("nan"),
            val,
            _mse(T, T_hat, t_test),
            _mse(M, M_hat, m_test),
            len(factors.objective_trace),
            True,
        )

    if norm_id == "MTN":
        fits = []
        for lam in lam_values:
            res = baselines.complete_matrix_mtn(M, m_train, lam, _cell_opts(cfg, lam))
            fits.append((lam, res, _mse(M, res.matrix, m_val)))
        lam, res, val = cross_validate(fits)
        return (
            lam,
            val,
            float("nan"),
            _mse(M, res.matrix, m_test),
            res.iterations,
            res.converged,
        )

    if norm_id in ("OTN", "SLTN"):
        kind = "overlapped" if norm_id == "OTN" else "scaled_latent"
        fits = []
        for lam in lam_values:
            res = baselines.complete_tensor(T, t_train, kind, lam, _cell_opts(cfg, lam))
            fits.append((lam, res, _mse(T, res.tensor, t_val)))
        lam, res, val = cross_validate(fits)
        return (
            lam,
            val,
            _mse(T, res.tensor, t_test),
            float("nan"),
            res.iterations,
            res.converged,
        )

    d = norms.parse_descriptor(norm_id)
    problem = CoupledProblem(
        tensor=T, tensor_mask=t_train, matrix=M, matrix_mask=m_train,
        coupled_mode=d.coupled_mode,
    )
    fits = []
    for lam in lam_values:
        res = solver.solve(problem, d, _cell_opts(cfg, lam))
        val = _pooled_mse(
            [(T, res.tensor, t_val)]
            + ([(M, res.matrix, m_val)] if matrix_val_counts else [])
        )
        fits.append((lam, res, val))
    lam, res, val = cross_validate(fits)
    return (
        lam,
        val,
        _mse(T, res.tensor, t_test),
        _mse(M, res.matrix, m_test),
        res.iterations,
        res.converged,
    )


def _load_data(cfg: ExperimentConfig) -> tuple[np.ndarray, np.ndarray, ObservationMask | None, ObservationMask | None]:
    """Returns (tensor, matrix, observed tensor mask or None, ditto matrix)."""
    if cfg.synthetic is not None:
        T, M = datagen.gen_instance(cfg.synthetic)
        return T, M, None, None
    T, t_obs = load_sparse_tensor(cfg.tensor_file)
    M, m_obs = load_matrix_csv(cfg.matrix_file)
    return T, M, t_obs, m_obs


def _subset_mask(base: ObservationMask | None, mask: ObservationMask) -> ObservationMask:
    """Restrict a generated mask to positions actually observed in the data."""
    if base is None:
        return mask
    base_set = {tuple(row) for row in base.indices}
    keep = np.array(
        [tuple(row) in base_set for row in mask.indices], dtype=bool
    )
    return ObservationMask(mask.shape, mask.indices[keep])


def run(cfg: ExperimentConfig) -> ExperimentReport:
    """Execute the full (norm x fraction x repetition) grid."""
    T, M, t_obs, m_obs = _load_data(cfg)
    report = ExperimentReport(config=cfg)
    for fraction in cfg.train_fractions:
        for rep in range(cfg.repetitions):
            mask_seed = 100_000 * cfg.seed + 1_000 * rep
            t_spec = datagen.MaskSpec(fraction, cfg.validation_fraction, mask_seed)
            m_spec = datagen.MaskSpec(fraction, cfg.validation_fraction, mask_seed + 1)
            t_masks = tuple(
                _subset_mask(t_obs, m) for m in datagen.gen_masks(T.shape, t_spec)
            )
            if cfg.matrix_fully_observed:
                m_masks = (
                    ObservationMask.full(M.shape),
                    ObservationMask.empty(M.shape),
                    ObservationMask.empty(M.shape),
                )
            else:
                m_masks = tuple(
                    _subset_mask(m_obs, m) for m in datagen.gen_masks(M.shape, m_spec)
                )
            for norm_id in cfg.norms:
                t0 = time.perf_counter()
                try:
                    lam, val, mse_t, mse_m, iters, conv = _fit_cell(
                        cfg, norm_id, T, M, t_masks, m_masks,
                        cell_seed=mask_seed + 7,
                    )
                    cell = CellResult(
                        norm=norm_id, fraction=fraction, repetition=rep,
                        selected_lambda=lam, validation_mse=val,
                        test_mse_tensor=mse_t, test_mse_matrix=mse_m,
                        iterations=iters, converged=conv,
                    )
                except Exception as exc:  # per-cell failure; run continues
                    cell = CellResult(
                        norm=norm_id, fraction=fraction, repetition=rep,
                        selected_lambda=float("nan"),
                        validation_mse=float("nan"),
                        test_mse_tensor=float("nan"),
                        test_mse_matrix=float("nan"),
                        iterations=0, converged=False, error=str(exc),
                    )
                cell.wall_time = time.perf_counter() - t0
                report.cells.append(cell)
    return report


# ---------------------------------------------------------------------------
# file formats


def load_sparse_tensor(path: str | Path) -> tuple[np.ndarray, ObservationMask]:
    """Read coordinate-format tensor data.

    Format: a header line ``dims: n1 n2 n3`` followed by one observed entry
    per line, ``i j k value`` with 1-based whitespace-separated indices.
    """
    path = Path(path)
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].strip().startswith("dims:"):
        raise ValueError(f"{path}: missing 'dims: n1 n2 n3' header")
    try:
        dims = tuple(int(x) for x in lines[0].split(":", 1)[1].split())
    except ValueError:
        raise ValueError(f"{path}:1: malformed dims header") from None
    if len(dims) != 3 or any(n <= 0 for n in dims):
        raise ValueError(f"{path}:1: dims must be three positive integers")
    T = np.zeros(dims)
    seen: set[tuple[int, int, int]] = set()
    indices = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ValueError(f"{path}:{lineno}: expected 'i j k value'")
        try:
            i, j, k = (int(p) for p in parts[:3])
            value = float(parts[3])
        except ValueError:
            raise ValueError(f"{path}:{lineno}: malformed entry") from None
        if not all(1 <= x <= n for x, n in zip((i, j, k), dims)):
            raise ValueError(f"{path}:{lineno}: index out of range for dims {dims}")
        pos = (i - 1, j - 1, k - 1)
        if pos in seen:
            raise ValueError(f"{path}:{lineno}: duplicate coordinate {(i, j, k)}")
        seen.add(pos)
        indices.append(pos)
        T[pos] = value
    return T, ObservationMask(dims, np.array(indices, dtype=np.intp).reshape(-1, 3))


def save_sparse_tensor(path: str | Path, T: np.ndarray, mask: ObservationMask) -> None:
    lines = [f"dims: {T.shape[0]} {T.shape[1]} {T.shape[2]}"]
    for i, j, k in mask.indices:
        lines.append(f"{i + 1} {j + 1} {k + 1} {float(T[i, j, k])!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_matrix_csv(path: str | Path) -> tuple[np.ndarray, ObservationMask]:
    """Read a dense CSV; empty cells are unobserved."""
    path = Path(path)
    rows: list[list[str]] = []
    with open(path) as fh:
        for line in fh.read().splitlines():
            rows.append(line.split(","))
    if not rows:
        raise ValueError(f"{path}: empty file")
    width = len(rows[0])
    for lineno, row in enumerate(rows, start=1):
        if len(row) != width:
            raise ValueError(f"{path}:{lineno}: ragged row ({len(row)} != {width})")
    M = np.zeros((len(rows), width))
    indices = []
    for i, row in enumerate(rows):
        for j, cell in enumerate(row):
            cell = cell.strip()
            if not cell:
                continue
            try:
                M[i, j] = float(cell)
            except ValueError:
                raise ValueError(
                    f"{path}:{i + 1}: non-numeric cell {cell!r}"
                ) from None
            indices.append((i, j))
    return M, ObservationMask(M.shape, np.array(indices, dtype=np.intp).reshape(-1, 2))


def save_matrix_csv(path: str | Path, M: np.ndarray, mask: ObservationMask) -> None:
    obs = {tuple(row) for row in mask.indices}
    lines = []
    for i in range(M.shape[0]):
        lines.append(
            ",".join(
                repr(float(M[i, j])) if (i, j) in obs else "" for j in range(M.shape[1])
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# report emission


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.10g}"
    return str(x)


RESULT_COLUMNS = (
    "norm", "fraction", "repetition", "selected_lambda", "validation_mse",
    "test_mse_tensor", "test_mse_matrix", "iterations", "converged", "error",
)


def emit_report(report: ExperimentReport, out_dir: str | Path) -> dict[str, Path]:
    """Write results.csv, summary.csv, plotdata.csv and timings.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}

    results = out / "results.csv"
    with open(results, "w") as fh:
        fh.write(",".join(RESULT_COLUMNS) + "\n")
        for c in report.cells:
            fh.write(
                ",".join(
                    _fmt(v)
                    for v in (
                        c.norm, c.fraction, c.repetition, c.selected_lambda,
                        c.validation_mse, c.test_mse_tensor, c.test_mse_matrix,
                        c.iterations, c.converged, c.error,
                    )
                )
                + "\n"
            )
    paths["results"] = results

    cfg = report.config
    summary = out / "summary.csv"
    with open(summary, "w") as fh:
        fh.write(
            "norm,fraction,mean_test_mse_tensor,std_test_mse_tensor,"
            "mean_test_mse_matrix,std_test_mse_matrix\n"
        )
        for norm_id in cfg.norms:
            for fraction in cfg.train_fractions:
                row = [norm_id, fraction]
                for which in ("tensor", "matrix"):
                    vals = [
                        getattr(c, f"test_mse_{which}")
                        for c in report.cells
                        if c.norm == norm_id and c.fraction == fraction and not c.error
                    ]
                    vals = [v for v in vals if not math.isnan(v)]
                    if vals:
                        row += [float(np.mean(vals)), float(np.std(vals))]
                    else:
                        row += [float("nan"), float("nan")]
                fh.write(",".join(_fmt(v) for v in row) + "\n")
    paths["summary"] = summary

    plotdata = out / "plotdata.csv"
    with open(plotdata, "w") as fh:
        fh.write("norm,fraction,mean_test_mse_tensor,mean_test_mse_matrix\n")
        for norm_id in cfg.norms:
            for fraction in cfg.train_fractions:
                fh.write(
                    ",".join(
                        _fmt(v)
                        for v in (
                            norm_id,
                            fraction,
                            report.mean_test_mse(norm_id, fraction, "tensor"),
                            report.mean_test_mse(norm_id, fraction, "matrix"),
                        )
                    )
                    + "\n"
                )
    paths["plotdata"] = plotdata

    timings = out / "timings.csv"
    with open(timings, "w") as fh:
        fh.write("norm,fraction,repetition,wall_time_s\n")
        for c in report.cells:
            fh.write(f"{c.norm},{_fmt(c.fraction)},{c.repetition},{c.wall_time:.3f}\n")
    paths["timings"] = timings
    return paths
