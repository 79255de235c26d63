"""
Monte-Carlo replication of the estimator and empirical checks of its
asymptotic distribution.
"""

import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

import numpy as np
from scipy.stats import chi2, kstest

from ..config import Config
from ..diffusion import BracCurve, ParamQ, SystemTemplate
from ..errors import DomainError, MonteCarloAbort, TacfitError
from ..matexp import Mat
from ..mestim import (
    Dataset,
    EstimatingSettings,
    FitSettings,
    covariance_from,
    fit,
    gamma_lebesgue,
    gamma_n,
    score,
    sine_example,
    sine_example_gamma,
    solve_estimating_equation,
)
from .synth import make_rng, replicate_seed, synthesize

log = logging.getLogger(__name__)

__all__ = [
    "ReplicateRecord",
    "McReport",
    "ScoreCltReport",
    "SineStudy",
    "monte_carlo",
    "score_clt",
    "sine_study",
    "MAX_FAILURE_FRACTION",
]

MAX_FAILURE_FRACTION = 0.2

ProgressFn = Callable[[int], None]


@dataclass
class ReplicateRecord:
    """One synthesize-and-fit cycle."""
    index: int
    seed: int
    q1: float
    q2: float
    sigma2_hat: float
    converged: bool
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.converged and self.error is None


@dataclass
class McReport:
    """Aggregate of a Monte-Carlo run at one observation count m."""
    m: int
    replicates: int
    sessions_per_replicate: int
    sigma: float
    q0: ParamQ
    mean_qhat: np.ndarray
    sd_qhat: np.ndarray
    scaled_cov: Mat
    theoretical_sigma: Mat
    mahalanobis_ks_pvalue: Optional[float]
    frobenius_rel_error: Optional[float]
    mean_sigma2_hat: float
    failures: int
    records: List[ReplicateRecord] = field(default_factory=list, repr=False)

    @property
    def successes(self) -> int:
        return self.replicates - self.failures

    @property
    def bias_norm(self) -> float:
        return float(np.linalg.norm(self.mean_qhat - self.q0.as_array()))

    @property
    def bias_standard_error(self) -> float:
        """Monte-Carlo standard error of |mean_qhat - q0|."""
        return float(np.linalg.norm(self.sd_qhat) / np.sqrt(max(self.successes, 1)))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "m": self.m,
            "replicates": self.replicates,
            "sessions_per_replicate": self.sessions_per_replicate,
            "sigma": self.sigma,
            "q0": [self.q0.q1, self.q0.q2],
            "mean_qhat": self.mean_qhat.tolist(),
            "sd_qhat": self.sd_qhat.tolist(),
            "scaled_cov": self.scaled_cov.tolist(),
            "theoretical_sigma": self.theoretical_sigma.tolist(),
            "mahalanobis_ks_pvalue": self.mahalanobis_ks_pvalue,
            "frobenius_rel_error": self.frobenius_rel_error,
            "mean_sigma2_hat": self.mean_sigma2_hat,
            "failures": self.failures,
        }


@dataclass
class ScoreCltReport:
    """Sample covariance of sqrt(M) U_n(q0) against sigma^2 Gamma_n."""
    m: int
    replicates: int
    mean_score: np.ndarray
    scaled_score_cov: Mat
    theoretical: Mat
    frobenius_rel_error: Optional[float]


@dataclass
class SineStudy:
    """Monte-Carlo of the generic solver on the sine example."""
    theta0: float
    n: int
    sigma: float
    replicates: int
    mean_theta: float
    empirical_var: float
    analytic_var: float
    failures: int

    @property
    def relative_error(self) -> float:
        return abs(self.empirical_var - self.analytic_var) / self.analytic_var


def _rel_frobenius(estimate: Mat, reference: Mat) -> Optional[float]:
    denom = float(np.linalg.norm(reference))
    if denom == 0:
        return None
    return float(np.linalg.norm(estimate - reference)) / denom


def _run_pool(
    count: int,
    job: Callable[[int], Any],
    workers: Optional[int],
    progress: Optional[ProgressFn],
) -> List[Any]:
    """Run job(0..count-1) on a thread pool; results come back in index order."""
    workers = workers or Config.PARALLEL_WORKERS
    results: List[Any] = [None] * count
    with ThreadPoolExecutor(max_workers=max(1, min(workers, count))) as executor:
        futures = {executor.submit(job, i): i for i in range(count)}
        for future in as_completed(futures):
            results[futures[future]] = future.result()
            if progress is not None:
                progress(1)
    return results


def monte_carlo(
    template: SystemTemplate,
    q0: ParamQ,
    mu: BracCurve,
    m: int,
    sigma: float,
    replicates: int,
    seed: int,
    *,
    sessions_per_replicate: int = 1,
    init: Optional[ParamQ] = None,
    settings: Optional[FitSettings] = None,
    quadrature_nodes: int = 10_000,
    design: str = "uniform",
    workers: Optional[int] = None,
    progress: Optional[ProgressFn] = None,
) -> McReport:
    """
    Repeat synthesize + fit and compare the spread of q_hat with sigma^2 Gamma^{-1}.

    Replicate i draws its sessions from seed replicate_seed(seed, i) (session j
    of a replicate uses replicate_seed of that seed and j), so reports depend
    only on the master seed.

    Args:
        template: Known matrices
        q0: True parameter
        mu: BrAC input shared by every session
        m: Observations per session
        sigma: Noise standard deviation
        replicates: Number of replicates (>= 2)
        seed: Master seed
        sessions_per_replicate: iid sessions pooled per replicate
        init: Fit starting point (defaults to (1, 1))
        settings: Fit settings
        quadrature_nodes: Trapezoid sub-intervals for the Lebesgue Gamma
        design: Observation design passed to synthesize
        workers: Thread count (defaults to Config.PARALLEL_WORKERS)
        progress: Called with 1 after each finished replicate

    Returns:
        McReport

    Raises:
        MonteCarloAbort: If more than 20% of the replicates fail
    """
    if replicates < 2:
        raise DomainError(f"replicates must be >= 2, got {replicates}")
    if sessions_per_replicate < 1:
        raise DomainError(f"sessions_per_replicate must be >= 1, got {sessions_per_replicate}")
    init = init or ParamQ(1.0, 1.0)
    settings = settings or FitSettings()

    def one(index: int) -> ReplicateRecord:
        rseed = replicate_seed(seed, index)
        try:
            sessions = [
                synthesize(template, q0, mu, m, sigma,
                           rseed if sessions_per_replicate == 1 else replicate_seed(rseed, j), design)
                for j in range(sessions_per_replicate)
            ]
            result = fit(template, Dataset(tuple(sessions)), init, settings)
        except (TacfitError, np.linalg.LinAlgError, ValueError) as e:
            log.debug(f"replicate {index} failed: {e}")
            return ReplicateRecord(index, rseed, float("nan"), float("nan"), float("nan"), False, str(e))
        return ReplicateRecord(
            index, rseed, result.q_hat.q1, result.q_hat.q2, result.sigma2_hat, result.converged
        )

    records: List[ReplicateRecord] = _run_pool(replicates, one, workers, progress)

    good = [r for r in records if r.ok]
    failures = replicates - len(good)
    if failures > MAX_FAILURE_FRACTION * replicates or len(good) < 2:
        raise MonteCarloAbort(
            f"{failures} of {replicates} replicates failed at m={m}",
            failures=failures,
            replicates=replicates,
        )
    if failures:
        log.warning(f"{failures} of {replicates} replicates failed at m={m}; excluded from the summary")

    M = m * sessions_per_replicate
    qhat = np.array([[r.q1, r.q2] for r in good])
    mean_qhat = qhat.mean(axis=0)
    sample_cov = np.cov(qhat, rowvar=False, ddof=1)
    scaled_cov = M * 0.5 * (sample_cov + sample_cov.T)

    gamma = gamma_lebesgue(template, q0, mu, quadrature_nodes)
    if sigma > 0:
        theoretical = covariance_from(sigma ** 2, gamma, 1)
        d = qhat - q0.as_array()
        distances = M * np.einsum("ri,ij,rj->r", d, gamma, d) / sigma ** 2
        pvalue: Optional[float] = float(kstest(distances, chi2(df=2).cdf).pvalue)
    else:
        theoretical = np.zeros((2, 2))
        pvalue = None

    report = McReport(
        m=m,
        replicates=replicates,
        sessions_per_replicate=sessions_per_replicate,
        sigma=sigma,
        q0=q0,
        mean_qhat=mean_qhat,
        sd_qhat=qhat.std(axis=0, ddof=1),
        scaled_cov=scaled_cov,
        theoretical_sigma=theoretical,
        mahalanobis_ks_pvalue=pvalue,
        frobenius_rel_error=_rel_frobenius(scaled_cov, theoretical),
        mean_sigma2_hat=float(np.mean([r.sigma2_hat for r in good])),
        failures=failures,
        records=records,
    )
    log.info(
        f"m={m}: mean q_hat=({mean_qhat[0]:.4f}, {mean_qhat[1]:.4f}) "
        f"failures={failures} frobenius={report.frobenius_rel_error}"
    )
    return report


def score_clt(
    template: SystemTemplate,
    q0: ParamQ,
    mu: BracCurve,
    m: int,
    sigma: float,
    replicates: int,
    seed: int,
    workers: Optional[int] = None,
) -> ScoreCltReport:
    """Empirical covariance of sqrt(M) U_n(q0) over replicates versus sigma^2 Gamma_n(q0)."""
    if replicates < 2:
        raise DomainError(f"replicates must be >= 2, got {replicates}")

    reference = synthesize(template, q0, mu, m, 0.0, seed)

    def one(index: int) -> np.ndarray:
        noise = make_rng(replicate_seed(seed, index)).standard_normal(m)
        session = reference.with_values(reference.tac_values + sigma * noise)
        return np.sqrt(m) * score(template, session, q0)

    scores = np.array(_run_pool(replicates, one, workers, None))
    theoretical = sigma ** 2 * gamma_n(template, reference, q0)
    cov = np.cov(scores, rowvar=False, ddof=1)
    return ScoreCltReport(
        m=m,
        replicates=replicates,
        mean_score=scores.mean(axis=0),
        scaled_score_cov=cov,
        theoretical=theoretical,
        frobenius_rel_error=_rel_frobenius(cov, theoretical),
    )


def sine_study(
    theta0: float = 1.5,
    n: int = 400,
    sigma: float = 0.1,
    replicates: int = 500,
    seed: int = 0,
    x_max: float = 2.0,
    settings: Optional[EstimatingSettings] = None,
    start_fraction: float = 0.8,
) -> SineStudy:
    """
    Solve the sine example repeatedly and compare the variance of
    sqrt(n)(theta_hat - theta0) with sigma^2/gamma.

    Newton starts from start_fraction * theta0 in every replicate.
    """
    estimates = []
    failures = 0
    for index in range(replicates):
        problem = sine_example(theta0, n, sigma, make_rng(replicate_seed(seed, index)), x_max)
        try:
            theta_hat, _ = solve_estimating_equation(problem, [start_fraction * theta0], settings)
        except TacfitError as e:
            log.debug(f"sine replicate {index} failed: {e}")
            failures += 1
            continue
        estimates.append(theta_hat[0])

    theta = np.asarray(estimates)
    return SineStudy(
        theta0=theta0,
        n=n,
        sigma=sigma,
        replicates=replicates,
        mean_theta=float(theta.mean()),
        empirical_var=float(n * theta.var(ddof=1)),
        analytic_var=sigma ** 2 / sine_example_gamma(theta0, x_max),
        failures=failures,
    )
