"""ADMM solver for coupled matrix-tensor completion.

Minimizes, over the tensor and the matrix jointly,

    0.5 * ||mask_M(M - M_obs)||_F^2 + 0.5 * ||mask_T(T - T_obs)||_F^2
        + lam * coupled_norm(T, M)

for any supported norm descriptor.  The tensor is represented through the
latent components dictated by the descriptor's layout; per regularized mode
an auxiliary unfolding is singular-value thresholded, the coupled mode's
unfolding being thresholded jointly with the matrix block.  Because the
observation operators are entrywise 0/1, every linear subproblem is solved
in closed form entry by entry.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import norms
from .norms import ComponentLayout, InvalidDescriptorError, NormDescriptor
from .prox import svd
from .tensor_ops import ObservationMask, concat_mode1, fold, mask_apply, unfold

__all__ = [
    "CoupledProblem",
    "SolverOptions",
    "SolverState",
    "CompletionResult",
    "solve",
    "supported",
    "update_matrix",
    "update_tensors",
    "update_auxiliaries",
    "update_duals",
    "objective",
]


@dataclass(frozen=True)
class CoupledProblem:
    """Observed tensor + observed matrix sharing mode ``coupled_mode``."""

    tensor: np.ndarray
    tensor_mask: ObservationMask
    matrix: np.ndarray
    matrix_mask: ObservationMask
    coupled_mode: int = 1

    def __post_init__(self):
        T = np.asarray(self.tensor, dtype=float)
        M = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "tensor", T)
        object.__setattr__(self, "matrix", M)
        if T.ndim != 3:
            raise ValueError("tensor must be 3-way")
        if M.ndim != 2:
            raise ValueError("matrix must be 2-d")
        if self.coupled_mode not in (1, 2, 3):
            raise ValueError("coupled mode must be 1, 2 or 3")
        if M.shape[0] != T.shape[self.coupled_mode - 1]:
            raise ValueError(
                f"matrix rows ({M.shape[0]}) must match tensor mode-"
                f"{self.coupled_mode} dimension ({T.shape[self.coupled_mode - 1]})"
            )
        if self.tensor_mask.shape != T.shape:
            raise ValueError("tensor mask shape mismatch")
        if self.matrix_mask.shape != M.shape:
            raise ValueError("matrix mask shape mismatch")

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.tensor.shape


@dataclass(frozen=True)
class SolverOptions:
    lam: float = 0.1
    beta: float = 1.0
    max_iters: int = 2000
    tol_primal: float = 1e-6
    tol_dual: float = 1e-6
    seed: int = 0
    record_objective: bool = True

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if self.beta <= 0:
            raise ValueError("beta must be > 0")
        if self.tol_primal <= 0 or self.tol_dual <= 0:
            raise ValueError("tolerances must be > 0")


@dataclass
class SolverState:
    """Mutable per-solve state; owned exclusively by one solve."""

    layout: ComponentLayout
    components: list[np.ndarray]
    M: np.ndarray
    X: np.ndarray
    Y: dict[int, np.ndarray]
    WM: np.ndarray
    W: dict[int, np.ndarray]
    iteration: int = 0


@dataclass
class CompletionResult:
    tensor: np.ndarray
    matrix: np.ndarray
    components: list[np.ndarray]
    objective_trace: np.ndarray
    primal_residual_trace: np.ndarray
    dual_residual_trace: np.ndarray
    final_primal_residual: float
    final_dual_residual: float
    iterations: int
    converged: bool
    layout: ComponentLayout = field(repr=False, default=None)


def supported(d: NormDescriptor) -> bool:
    """Solver-supported descriptors: single coupling, no dash tags."""
    try:
        norms.validate(d)
    except InvalidDescriptorError:
        return False
    return "-" not in d.tags and d.second_coupled_mode is None


def _init_state(problem: CoupledProblem, lay: ComponentLayout) -> SolverState:
    dims = problem.dims
    C = lay.n_components
    zeros_t = lambda: np.zeros(dims)
    return SolverState(
        layout=lay,
        components=[zeros_t() for _ in range(C)],
        M=np.zeros_like(problem.matrix),
        X=np.zeros_like(problem.matrix),
        Y={mode: zeros_t() for mode, _, _ in lay.regularized_modes()},
        WM=np.zeros_like(problem.matrix),
        W={mode: zeros_t() for mode, _, _ in lay.regularized_modes()},
    )


def update_matrix(
    state: SolverState, problem: CoupledProblem, opts: SolverOptions
) -> np.ndarray:
    """Closed-form minimizer of the matrix block of the Lagrangian.

    The observation operator is entrywise, so (Omega^T Omega + beta I) is
    diagonal and the solve is elementwise.
    """
    omega = problem.matrix_mask.indicator()
    rhs = mask_apply(problem.matrix, problem.matrix_mask) - state.WM + opts.beta * state.X
    return rhs / (omega + opts.beta)


def update_tensors(
    state: SolverState, problem: CoupledProblem, opts: SolverOptions
) -> list[np.ndarray]:
    """Joint closed-form minimizer of the latent tensor block.

    Per entry the normal equations are (omega * ones + beta * diag(g)) t =
    rhs, with omega the 0/1 mask indicator and g_c the number of auxiliary
    constraints attached to component c; solved by the Sherman-Morrison
    rank-one update.
    """
    lay = state.layout
    beta = opts.beta
    C = lay.n_components
    g = np.array(
        [sum(1 for _, _, c in lay.regularized_modes() if c == ci) for ci in range(C)],
        dtype=float,
    )
    omega = problem.tensor_mask.indicator()
    t_obs = mask_apply(problem.tensor, problem.tensor_mask)
    rhs = []
    for ci in range(C):
        acc = t_obs.copy()
        for mode, _, c in lay.regularized_modes():
            if c == ci:
                acc += beta * state.Y[mode] - state.W[mode]
        rhs.append(acc)
    u = [rhs[ci] / (beta * g[ci]) for ci in range(C)]
    s = sum(u)
    denom = 1.0 + omega * float(np.sum(1.0 / (beta * g)))
    correction = omega * s / denom
    return [u[ci] - correction / (beta * g[ci]) for ci in range(C)]


def _threshold(arg: np.ndarray, tau: float) -> tuple[np.ndarray, float]:
    """SVT returning the thresholded matrix and its trace norm."""
    if min(arg.shape, default=0) == 0:
        return arg.copy(), 0.0
    f = svd(arg)
    s = np.maximum(f.S - tau, 0.0)
    if tau == 0.0:
        # identity prox: keep the argument bit-exact
        return arg.copy(), float(s.sum())
    return (f.U * s) @ f.Vt, float(s.sum())


def update_auxiliaries(
    state: SolverState, problem: CoupledProblem, opts: SolverOptions
) -> tuple[np.ndarray, dict[int, np.ndarray], float]:
    """Prox (SVT) step for the auxiliary unfoldings and the matrix block.

    Returns the new X, the new Y dict, and the regularizer value at the new
    auxiliaries (free from the thresholded singular values).
    """
    lay = state.layout
    beta = opts.beta
    dims = problem.dims
    newY: dict[int, np.ndarray] = {}
    newX = state.X
    reg_value = 0.0
    for mode, scale, c in lay.regularized_modes():
        arg = unfold(state.components[c] + state.W[mode] / beta, mode)
        nt = arg.shape[1]
        coupled = mode == lay.coupled_mode and c == lay.coupled_component
        if coupled:
            arg = concat_mode1(arg, state.M + state.WM / beta)
        Z, tn = _threshold(arg, opts.lam * scale / beta)
        reg_value += scale * tn
        newY[mode] = fold(Z[:, :nt], mode, dims)
        if coupled:
            newX = Z[:, nt:]
    return newX, newY, reg_value


def update_duals(
    state: SolverState, opts: SolverOptions
) -> tuple[np.ndarray, dict[int, np.ndarray]]:
    """Gradient-ascent dual step: W <- W + beta * (primal - auxiliary)."""
    lay = state.layout
    WM = state.WM + opts.beta * (state.M - state.X)
    W = {
        mode: state.W[mode] + opts.beta * (state.components[c] - state.Y[mode])
        for mode, _, c in lay.regularized_modes()
    }
    return WM, W


def objective(
    problem: CoupledProblem,
    d: NormDescriptor,
    lam: float,
    T: np.ndarray,
    M: np.ndarray,
    tol: float = 1e-6,
) -> float:
    """Value of the completion objective at ``(T, M)``."""
    loss = 0.5 * float(
        np.linalg.norm(mask_apply(M - problem.matrix, problem.matrix_mask)) ** 2
        + np.linalg.norm(mask_apply(T - problem.tensor, problem.tensor_mask)) ** 2
    )
    if lam == 0.0:
        return loss
    return loss + lam * norms.evaluate(T, M, d, tol=tol)


def _loss(problem: CoupledProblem, T: np.ndarray, M: np.ndarray) -> float:
    return 0.5 * float(
        np.linalg.norm(mask_apply(M - problem.matrix, problem.matrix_mask)) ** 2
        + np.linalg.norm(mask_apply(T - problem.tensor, problem.tensor_mask)) ** 2
    )


def solve(
    problem: CoupledProblem,
    d: NormDescriptor,
    opts: SolverOptions = SolverOptions(),
) -> CompletionResult:
    """Run ADMM to convergence or the iteration cap.

    Deterministic: all variables start at zero.  Converged means both the
    maximum primal residual and the maximum (beta-scaled) dual residual fell
    below their tolerances, relative to max(1, ||observed data||_F).
    """
    if not supported(d):
        raise InvalidDescriptorError(
            f"descriptor {norms.format_descriptor(d)} is not solver-supported"
        )
    if d.coupled_mode != problem.coupled_mode:
        raise InvalidDescriptorError(
            "descriptor coupled mode does not match the problem"
        )
    lay = norms.layout(d, problem.dims)
    state = _init_state(problem, lay)
    data_norm = np.sqrt(
        np.linalg.norm(mask_apply(problem.tensor, problem.tensor_mask)) ** 2
        + np.linalg.norm(mask_apply(problem.matrix, problem.matrix_mask)) ** 2
    )
    res_scale = max(1.0, float(data_norm))

    obj_trace: list[float] = []
    primal_trace: list[float] = []
    dual_trace: list[float] = []
    converged = False
    primal = dual = np.inf

    for it in range(1, opts.max_iters + 1):
        state.M = update_matrix(state, problem, opts)
        state.components = update_tensors(state, problem, opts)
        newX, newY, reg_value = update_auxiliaries(state, problem, opts)

        dual = opts.beta * max(
            [float(np.linalg.norm(newX - state.X))]
            + [float(np.linalg.norm(newY[m] - state.Y[m])) for m in newY]
        )
        state.X, state.Y = newX, newY
        state.WM, state.W = update_duals(state, opts)
        primal = max(
            [float(np.linalg.norm(state.M - state.X))]
            + [
                float(np.linalg.norm(state.components[c] - state.Y[mode]))
                for mode, _, c in lay.regularized_modes()
            ]
        )
        state.iteration = it

        if opts.record_objective:
            # regularizer evaluated at the auxiliaries (free); loss at the primal
            T_cur = sum(state.components)
            obj_trace.append(_loss(problem, T_cur, state.M) + opts.lam * reg_value)
        primal_trace.append(primal)
        dual_trace.append(dual)

        if primal <= opts.tol_primal * res_scale and dual <= opts.tol_dual * res_scale:
            converged = True
            break

    T_hat = sum(state.components)
    return CompletionResult(
        tensor=T_hat,
        matrix=state.M,
        components=state.components,
        objective_trace=np.array(obj_trace),
        primal_residual_trace=np.array(primal_trace),
        dual_residual_trace=np.array(dual_trace),
        final_primal_residual=float(primal),
        final_dual_residual=float(dual),
        iterations=state.iteration,
        converged=converged,
        layout=lay,
    )
