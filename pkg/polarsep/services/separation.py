"""
Two-Stage Separation Service

Optimization-based reflection/transmission separation on a polarized
stack. Stage 1 estimates the reflection stack R inside the box [0, M] by
asking the implied transmission T = M - R to be depolarized, with a
total-variation prior on the reflection intensity. Stage 2 refines the
split of the total intensity by removing positive PNCC correlation between
reflection and transmission while staying close to the stage-1 split. T is
never a free variable: every iterate satisfies R + T = M.
"""

import logging
import time
from typing import Callable, List, NamedTuple, Optional, Tuple, Union

import numpy as np

from polarsep.models.polarization import PolarizedStack, StokesMaps
from polarsep.models.separation import SeparationResult, SeparatorConfig
from polarsep.services.losses import pncc, positive_pncc
from polarsep.services.polarization import compute_stokes, dop_histogram
from polarsep.utils.metrics import separation_duration, solver_errors, solver_iterations
from polarsep.utils.validation import DomainError, SolverError, require_same_shape

logger = logging.getLogger(__name__)

IterateCallback = Callable[[str, int, np.ndarray], None]
Objective = Callable[[np.ndarray], Tuple[float, np.ndarray]]

# Median DoP of M above which both layers are likely polarized.
SUSPECT_MEDIAN_DOP = 0.8


class SolverOutcome(NamedTuple):
    """Final iterate and accepted objective values of one stage."""

    x: np.ndarray
    trace: List[float]
    converged: bool
    iterations: int


def _intensity(channels: np.ndarray) -> np.ndarray:
    return channels.sum(axis=0) / 2.0


def _channels(x: Union[PolarizedStack, np.ndarray]) -> np.ndarray:
    return np.asarray(x.channels if isinstance(x, PolarizedStack) else x, dtype=np.float64)


def total_variation(img: np.ndarray, eps: float) -> Tuple[float, np.ndarray]:
    """
    Pixel-averaged Charbonnier total variation and its gradient.

    mean(sqrt(dx^2 + dy^2 + eps^2) - eps) with forward differences and
    zero difference across the last row and column.
    """
    dx = np.zeros_like(img)
    dy = np.zeros_like(img)
    dx[:, :-1] = img[:, 1:] - img[:, :-1]
    dy[:-1, :] = img[1:, :] - img[:-1, :]
    magnitude = np.sqrt(dx**2 + dy**2 + eps**2)
    count = img.size
    value = float(np.sum(magnitude - eps) / count)

    gx = dx / magnitude / count
    gy = dy / magnitude / count
    grad = np.zeros_like(img)
    grad[:, 1:] += gx[:, :-1]
    grad[:, :-1] -= gx[:, :-1]
    grad[1:, :] += gy[:-1, :]
    grad[:-1, :] -= gy[:-1, :]
    return value, grad


def depolarization_residual(M: Union[PolarizedStack, np.ndarray], R: Union[PolarizedStack, np.ndarray]) -> float:
    """Sum over pixels of (T1 - T3)^2 + (T2 - T4)^2 for T = M - R."""
    T = _channels(M) - _channels(R)
    return float(np.sum((T[0] - T[2]) ** 2 + (T[1] - T[3]) ** 2))


def stage1_objective(
    R: Union[PolarizedStack, np.ndarray],
    M: Union[PolarizedStack, np.ndarray],
    cfg: SeparatorConfig,
) -> Tuple[float, np.ndarray]:
    """
    Stage-1 energy and its gradient with respect to the reflection channels.

    E = lambda_pol * sum[(T1 - T3)^2 + (T2 - T4)^2] + lambda_tv * TV(R_bar),
    with T = M - R and R_bar the total intensity of R.
    """
    R = _channels(R)
    M = _channels(M)
    T = M - R
    d1 = T[0] - T[2]
    d2 = T[1] - T[3]
    value = cfg.lambda_pol * float(np.sum(d1**2 + d2**2))
    grad = np.empty_like(R)
    grad[0] = -2.0 * cfg.lambda_pol * d1
    grad[2] = 2.0 * cfg.lambda_pol * d1
    grad[1] = -2.0 * cfg.lambda_pol * d2
    grad[3] = 2.0 * cfg.lambda_pol * d2

    if cfg.lambda_tv > 0:
        tv, tv_grad = total_variation(_intensity(R), cfg.tv_epsilon)
        value += cfg.lambda_tv * tv
        grad += cfg.lambda_tv * tv_grad[None] / 2.0
    return value, grad


def stage2_objective(
    delta: np.ndarray,
    M_bar: np.ndarray,
    R_bar: np.ndarray,
    cfg: SeparatorConfig,
) -> Tuple[float, np.ndarray]:
    """
    Stage-2 energy and its gradient with respect to ``delta``.

    E = lambda_pncc * P+(R_bar + delta, M_bar - R_bar - delta) + lambda_prox * mean(delta^2)
    + lambda_tv * TV(delta), where P+ is the positive-part squared PNCC penalty.
    An uncorrelated pair with delta = 0 is a minimizer.
    """
    value = 0.0
    grad = np.zeros_like(delta, dtype=np.float64)
    if cfg.lambda_pncc > 0:
        refl = R_bar + delta
        loss = positive_pncc(refl, M_bar - refl, cfg.pyramid)
        value += cfg.lambda_pncc * loss.value
        grad += cfg.lambda_pncc * (loss.grad_a - loss.grad_b)
    if cfg.lambda_prox > 0:
        value += cfg.lambda_prox * float(np.mean(delta**2))
        grad += cfg.lambda_prox * 2.0 * delta / delta.size
    if cfg.lambda_tv > 0:
        tv, tv_grad = total_variation(delta, cfg.tv_epsilon)
        value += cfg.lambda_tv * tv
        grad += cfg.lambda_tv * tv_grad
    return value, grad


def projected_gradient(
    objective: Objective,
    x0: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    cfg: SeparatorConfig,
    stage: str,
    on_iterate: Optional[IterateCallback] = None,
) -> SolverOutcome:
    """
    Box-constrained gradient descent with Armijo backtracking.

    Each iteration starts from min(step_size, twice the last accepted step)
    and halves until f(x+) <= f(x) - armijo * <grad, x - x+>. Stops on a
    relative decrease below ``tol``, a stationary projected step, a step
    below ``min_step`` or ``max_iters``.

    Args:
        objective: Returns (value, gradient)
        x0: Starting point
        lower: Elementwise lower bound
        upper: Elementwise upper bound
        cfg: Solver settings
        stage: Stage label for logs and metrics
        on_iterate: Called with (stage, iteration, x) for every accepted iterate

    Returns:
        SolverOutcome
    """
    x = np.clip(x0, lower, upper)
    value, grad = objective(x)
    trace = [value]
    if not np.isfinite(value) or not np.all(np.isfinite(grad)):
        solver_errors.labels(stage=stage).inc()
        raise SolverError(f"{stage}: non-finite objective at the starting point", iterate=x, trace=trace)
    if on_iterate is not None:
        on_iterate(stage, 0, x)

    step = cfg.step_size
    converged = False
    iterations = 0
    while iterations < cfg.max_iters:
        if value == 0.0:
            converged = True
            break
        trial = step
        accepted = False
        while trial >= cfg.min_step:
            candidate = np.clip(x - trial * grad, lower, upper)
            decrease = float(np.vdot(grad, x - candidate))
            if decrease <= 0.0:
                break
            new_value, new_grad = objective(candidate)
            if not np.isfinite(new_value) or not np.all(np.isfinite(new_grad)):
                solver_errors.labels(stage=stage).inc()
                raise SolverError(
                    f"{stage}: non-finite objective at iteration {iterations + 1}",
                    iterate=candidate,
                    trace=trace,
                )
            if new_value <= value - cfg.armijo * decrease:
                accepted = True
                break
            trial /= 2.0

        if not accepted:
            converged = True
            break

        relative = (value - new_value) / max(abs(value), np.finfo(np.float64).tiny)
        x, value, grad = candidate, new_value, new_grad
        trace.append(value)
        iterations += 1
        step = min(cfg.step_size, 2.0 * trial)
        if on_iterate is not None:
            on_iterate(stage, iterations, x)
        if relative < cfg.tol:
            converged = True
            break

    solver_iterations.labels(stage=stage).inc(iterations)
    logger.debug(f"{stage}: {iterations} iterations, objective {trace[0]:.6g} -> {value:.6g}, converged={converged}")
    return SolverOutcome(x=x, trace=trace, converged=converged, iterations=iterations)


def init_reflection(M: PolarizedStack, stokes: StokesMaps) -> PolarizedStack:
    """
    Attribute the polarized part of M to reflection.

    R0_k = clip(M_k - (1 - rho) I / 2, 0, M_k).
    """
    unpolarized_share = (1.0 - stokes.dop) * stokes.intensity / 2.0
    channels = np.clip(M.channels - unpolarized_share[None], 0.0, M.channels)
    return M.with_channels(channels)


def _check_mixed(M: PolarizedStack) -> None:
    if M.domain != "linear_raw":
        raise DomainError("separation requires a linear_raw stack")


def _normalization(M: PolarizedStack) -> float:
    peak = float(M.channels.max())
    return peak if peak > 0 else 1.0


def _stage1(
    M_n: np.ndarray,
    R_start: np.ndarray,
    cfg: SeparatorConfig,
    on_iterate: Optional[IterateCallback],
) -> SolverOutcome:
    return projected_gradient(
        lambda R: stage1_objective(R, M_n, cfg),
        R_start,
        np.zeros_like(M_n),
        M_n,
        cfg,
        "stage1",
        on_iterate,
    )


def _stage2(
    M_n: np.ndarray,
    R_n: np.ndarray,
    cfg: SeparatorConfig,
    on_iterate: Optional[IterateCallback],
) -> SolverOutcome:
    M_bar = _intensity(M_n)
    R_bar = _intensity(R_n)
    if min(M_bar.shape) < cfg.pyramid.min_size:
        logger.warning(
            f"Image of {M_bar.shape[0]}x{M_bar.shape[1]} is smaller than the feature pyramid "
            f"({cfg.pyramid.min_size}x{cfg.pyramid.min_size}); skipping stage 2",
            extra={"stage": "stage2", "min_size": cfg.pyramid.min_size},
        )
        return SolverOutcome(x=np.zeros_like(M_bar), trace=[], converged=True, iterations=0)

    outcome = projected_gradient(
        lambda d: stage2_objective(d, M_bar, R_bar, cfg),
        np.zeros_like(M_bar),
        -R_bar,
        M_bar - R_bar,
        cfg,
        "stage2",
        on_iterate,
    )
    before = pncc(R_bar, M_bar - R_bar, cfg.pyramid).value
    after = pncc(R_bar + outcome.x, M_bar - R_bar - outcome.x, cfg.pyramid).value
    if after > before:
        logger.debug(f"stage2: PNCC rose from {before:.4f} to {after:.4f}; keeping the stage-1 split")
        return outcome._replace(x=np.zeros_like(M_bar))
    return outcome


def distribute_correction(M: np.ndarray, R: np.ndarray, delta: np.ndarray) -> np.ndarray:
    """
    Spread an intensity correction over the four reflection channels.

    Positive corrections fill each channel in proportion to its headroom
    M_k - R_k, negative ones drain it in proportion to R_k, so every channel
    stays inside [0, M_k].
    """
    room_up = M - R
    total_up = room_up.sum(axis=0)
    total_down = R.sum(axis=0)
    change = 2.0 * delta
    share_up = np.divide(room_up, total_up[None], out=np.zeros_like(room_up), where=total_up[None] > 0)
    share_down = np.divide(R, total_down[None], out=np.zeros_like(R), where=total_down[None] > 0)
    shift = np.where(change[None] > 0, change[None] * share_up, change[None] * share_down)
    return np.clip(R + shift, 0.0, M)


def stage1_estimate_R(
    M: PolarizedStack,
    cfg: Optional[SeparatorConfig] = None,
    r_init: Optional[PolarizedStack] = None,
) -> PolarizedStack:
    """
    Estimate the reflection stack by projected gradient descent on the stage-1 energy.

    Args:
        M: Mixed linear stack
        cfg: Separator configuration
        r_init: Starting reflection, default init_reflection(M)

    Returns:
        Reflection stack within [0, M]
    """
    cfg = cfg or SeparatorConfig()
    _check_mixed(M)
    scale = _normalization(M)
    if r_init is None:
        r_init = init_reflection(M, compute_stokes(M))
    else:
        require_same_shape(r_init.channels, M.channels, what="initial reflection and mixed stacks")
    outcome = _stage1(M.channels / scale, r_init.channels / scale, cfg, None)
    return M.with_channels(np.clip(outcome.x * scale, 0.0, M.channels))


def stage2_refine_T(
    M: PolarizedStack,
    R_hat: PolarizedStack,
    cfg: Optional[SeparatorConfig] = None,
) -> np.ndarray:
    """
    Refine the transmission intensity by decorrelating it from the reflection.

    Images smaller than the feature pyramid are returned as M_bar - R_bar.

    Args:
        M: Mixed linear stack
        R_hat: Reflection estimate within [0, M]
        cfg: Separator configuration

    Returns:
        Transmission intensity M_bar - (R_bar + delta)
    """
    cfg = cfg or SeparatorConfig()
    _check_mixed(M)
    require_same_shape(R_hat.channels, M.channels, what="reflection and mixed stacks")
    scale = _normalization(M)
    M_n = M.channels / scale
    R_n = np.clip(R_hat.channels / scale, 0.0, M_n)
    outcome = _stage2(M_n, R_n, cfg, None)
    R_refined = distribute_correction(M_n, R_n, outcome.x)
    return _intensity(M_n - R_refined) * scale


def _pncc_value(R_bar: np.ndarray, M_bar: np.ndarray, cfg: SeparatorConfig) -> Optional[float]:
    if min(R_bar.shape) < cfg.pyramid.min_size:
        return None
    return pncc(R_bar, M_bar - R_bar, cfg.pyramid).value


def _assemble(
    M: PolarizedStack,
    R_n: np.ndarray,
    scale: float,
    traces: dict,
    converged: bool,
    **diagnostics,
) -> SeparationResult:
    R_hat = M.with_channels(np.clip(R_n * scale, 0.0, M.channels))
    return SeparationResult(
        R_hat=R_hat,
        T_hat=_intensity(M.channels - R_hat.channels),
        objective_trace={name: tuple(values) for name, values in traces.items()},
        converged=converged,
        scale=scale,
        **diagnostics,
    )


def separate(
    M: PolarizedStack,
    cfg: Optional[SeparatorConfig] = None,
    on_iterate: Optional[IterateCallback] = None,
) -> SeparationResult:
    """
    Run Stokes recovery, reflection initialization and both optimization stages.

    Args:
        M: Mixed linear stack
        cfg: Separator configuration
        on_iterate: Optional observer called with (stage, iteration, x) for
            each accepted iterate, x in units normalized by the peak of M

    Returns:
        SeparationResult

    Raises:
        SolverError: With ``partial`` set to the best result available
    """
    cfg = cfg or SeparatorConfig()
    _check_mixed(M)
    started = time.perf_counter()

    stokes = compute_stokes(M)
    counts, edges = dop_histogram(stokes)
    valid = (stokes.intensity > 0) & (stokes.mask == 1)
    median_dop = float(np.median(stokes.dop[valid])) if np.any(valid) else 0.0
    suspect = median_dop >= SUSPECT_MEDIAN_DOP
    if suspect:
        logger.warning(
            f"Median DoP of the mixed image is {median_dop:.2f}; transmission is likely polarized "
            f"and the depolarization prior may misattribute it"
        )
    diagnostics = {
        "dop_histogram": tuple(int(c) for c in counts),
        "dop_bin_edges": tuple(float(e) for e in edges),
        "suspect_polarized_transmission": suspect,
    }

    scale = _normalization(M)
    M_n = M.channels / scale
    R0 = init_reflection(M, stokes).channels / scale
    logger.info(f"Separating {M.height}x{M.width} stack (scale {scale:.1f})")

    try:
        stage1 = _stage1(M_n, R0, cfg, on_iterate)
    except SolverError as e:
        e.partial = _assemble(M, np.clip(e.iterate, 0.0, M_n), scale, {"stage1": e.trace}, False, **diagnostics)
        logger.error(
            f"Stage 1 failed: {e}",
            exc_info=True,
            extra={"stage": "stage1", "accepted_iterations": len(e.trace)},
        )
        raise

    M_bar = _intensity(M_n)
    R_bar = _intensity(stage1.x)
    pncc_before = _pncc_value(R_bar, M_bar, cfg)
    try:
        stage2 = _stage2(M_n, stage1.x, cfg, on_iterate)
    except SolverError as e:
        e.partial = _assemble(
            M, stage1.x, scale, {"stage1": stage1.trace, "stage2": e.trace}, False,
            pncc_before=pncc_before, **diagnostics,
        )
        logger.error(
            f"Stage 2 failed: {e}",
            exc_info=True,
            extra={"stage": "stage2", "accepted_iterations": len(e.trace)},
        )
        raise

    R_final = distribute_correction(M_n, stage1.x, stage2.x)
    result = _assemble(
        M,
        R_final,
        scale,
        {"stage1": stage1.trace, "stage2": stage2.trace},
        stage1.converged and stage2.converged,
        pncc_before=pncc_before,
        pncc_after=_pncc_value(R_bar + stage2.x, M_bar, cfg),
        **diagnostics,
    )
    elapsed = time.perf_counter() - started
    separation_duration.observe(elapsed)
    logger.info(
        f"Separation finished in {elapsed:.2f}s: stage1 {stage1.iterations} its, "
        f"stage2 {stage2.iterations} its, converged={result.converged}"
    )
    return result
