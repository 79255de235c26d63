"""
Orchestration of estimate / simulate / mc-table / gamma runs.

Each run catches its own failures and reports them as a RunResult carrying
the process exit code: 0 success, 1 input or configuration error,
2 numerical non-convergence.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from time import perf_counter
from typing import Callable, Dict, List, Optional, Union

import numpy as np

from .diffusion import BracCurve, realize, tac_series
from .errors import ConvergenceError, MonteCarloAbort
from .mestim import covariance_from, fit, gamma_lebesgue, gamma_n
from .schema import (
    EllipseModel,
    FitReport,
    GammaReport,
    McRow,
    McTableReport,
    RunConfig,
    matrix,
)
from .sessions import load_session, write_fit_table, write_replicate_table, write_session
from .simkit import McReport, mm_brac, mm_concentration, monte_carlo, synthesize

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NONCONVERGED = 2

PathLike = Union[str, Path]

ZERO_HISTORY_NOTE = (
    "All TAC observations are fitted against the model driven by the interpolated "
    "BrAC from time 0 with a zero initial state."
)


@dataclass
class RunResult:
    """Result of a single run."""
    name: str  # "estimate", "simulate", "mc-table", "gamma"
    success: bool
    elapsed_time: float
    exit_code: int = EXIT_OK
    error: Optional[str] = None
    metadata: Optional[Dict] = None


class StudyRunner:
    """Runs the tacfit workflows for one configuration and output directory."""

    def __init__(self, config: Optional[RunConfig] = None, out_dir: PathLike = "results"):
        """
        Initialize the runner.

        Args:
            config: Run configuration (environment defaults if None)
            out_dir: Directory that receives reports and tables
        """
        self.config = config or RunConfig()
        self.out_dir = Path(out_dir)
        self.results: List[RunResult] = []

    def _record(self, result: RunResult) -> RunResult:
        self.results.append(result)
        return result

    def _failure(self, name: str, t0: float, code: int, e: Exception) -> RunResult:
        log.debug(f"{name} failed", exc_info=True)
        return self._record(RunResult(
            name=name,
            success=False,
            elapsed_time=perf_counter() - t0,
            exit_code=code,
            error=str(e),
        ))

    def simulation_brac(self) -> BracCurve:
        return mm_brac(self.config.mm.to_params(), self.config.horizon_T, self.config.brac_subintervals)

    def run_estimate(self, tac_path: PathLike, brac_path: PathLike) -> RunResult:
        """
        Load a session, fit q and write fit_report.json and fit_curve.csv.

        Args:
            tac_path: TAC CSV
            brac_path: BrAC CSV

        Returns:
            RunResult; exit code 2 when the optimizer did not converge
            (the report is still written), 1 when q is not identifiable
        """
        t0 = perf_counter()
        try:
            cfg = self.config
            template = cfg.build_template()
            session = load_session(tac_path, brac_path, cfg)
            result = fit(template, session, cfg.init_q(), cfg.fit_settings())
            fitted = tac_series(realize(template, result.q_hat), session.brac, session.times)

            ellipse = result.ellipse(0.95)
            report = FitReport(
                q_hat=[result.q_hat.q1, result.q_hat.q2],
                sigma2_hat=result.sigma2_hat,
                gamma_hat=matrix(result.gamma_hat),
                covariance=None if result.cov_qhat is None else matrix(result.cov_qhat),
                ellipse=None if ellipse is None else EllipseModel(
                    level=ellipse.level,
                    center=ellipse.center.tolist(),
                    semi_axes=ellipse.semi_axes.tolist(),
                    angle_rad=ellipse.angle,
                    chi2_quantile=ellipse.quantile,
                ),
                residuals=(fitted - session.tac_values).tolist(),
                objective_value=result.objective_value,
                gradient_norm=result.gradient_norm,
                iterations=result.iterations,
                converged=result.converged,
                identifiable=result.identifiable,
                condition_number=result.condition_number if np.isfinite(result.condition_number) else None,
                starts_tried=result.starts_tried,
                M=result.M,
                template=template.label,
                brac_subintervals=cfg.brac_subintervals,
                horizon_T=session.horizon_T,
                warnings=list(result.warnings),
                notes=[ZERO_HISTORY_NOTE],
            )

            self.out_dir.mkdir(parents=True, exist_ok=True)
            report_path = self.out_dir / "fit_report.json"
            curve_path = self.out_dir / "fit_curve.csv"
            report_path.write_text(report.model_dump_json(indent=2))
            write_fit_table(curve_path, session.times, session.tac_values, fitted)

            if not result.identifiable:
                code, error = EXIT_INPUT, f"q is not identifiable from this session: {result.warnings[-1]}"
            elif not result.converged:
                code, error = EXIT_NONCONVERGED, f"fit did not converge: {result.message}"
            else:
                code, error = EXIT_OK, None

            return self._record(RunResult(
                name="estimate",
                success=code == EXIT_OK,
                elapsed_time=perf_counter() - t0,
                exit_code=code,
                error=error,
                metadata={
                    "fit": result,
                    "report": report,
                    "session": session,
                    "paths": [str(report_path), str(curve_path)],
                },
            ))
        except ConvergenceError as e:
            return self._failure("estimate", t0, EXIT_NONCONVERGED, e)
        except Exception as e:
            return self._failure("estimate", t0, EXIT_INPUT, e)

    def run_simulate(self) -> RunResult:
        """Write tac.csv and brac.csv for a synthetic session."""
        t0 = perf_counter()
        try:
            cfg = self.config
            template = cfg.build_template()
            params = cfg.mm.to_params()
            nodes, conc = mm_concentration(params, cfg.horizon_T, cfg.brac_subintervals)
            mu = BracCurve.uniform(cfg.horizon_T, 0.5 * (conc[:-1] + conc[1:]))
            session = synthesize(template, cfg.true_q(), mu, cfg.m, cfg.sigma, cfg.seed, cfg.design)

            tac_path = self.out_dir / "tac.csv"
            brac_path = self.out_dir / "brac.csv"
            write_session(session, tac_path, brac_path, brac_nodes=(nodes, conc))
            return self._record(RunResult(
                name="simulate",
                success=True,
                elapsed_time=perf_counter() - t0,
                metadata={"session": session, "paths": [str(tac_path), str(brac_path)]},
            ))
        except Exception as e:
            return self._failure("simulate", t0, EXIT_INPUT, e)

    def run_mc_table(self, progress_callback: Optional[Callable[[int, int], None]] = None) -> RunResult:
        """
        Monte-Carlo table over the configured observation counts.

        Args:
            progress_callback: Called as (m, finished) after each replicate

        Returns:
            RunResult with the McReports under metadata["reports"]
        """
        t0 = perf_counter()
        cfg = self.config
        reports: List[McReport] = []
        try:
            template = cfg.build_template()
            mu = self.simulation_brac()
            for m in cfg.m_values:
                progress = None
                if progress_callback is not None:
                    progress = lambda n, m=m: progress_callback(m, n)
                reports.append(monte_carlo(
                    template,
                    cfg.true_q(),
                    mu,
                    m,
                    cfg.sigma,
                    cfg.replicates,
                    cfg.seed,
                    sessions_per_replicate=cfg.sessions_per_replicate,
                    init=cfg.init_q(),
                    settings=cfg.fit_settings(),
                    quadrature_nodes=cfg.quadrature_nodes,
                    design=cfg.design,
                    workers=cfg.workers,
                    progress=progress,
                ))
        except MonteCarloAbort as e:
            if reports:
                self._write_mc(reports, template.label)
            return self._failure("mc-table", t0, EXIT_NONCONVERGED, e)
        except Exception as e:
            return self._failure("mc-table", t0, EXIT_INPUT, e)

        paths = self._write_mc(reports, template.label)
        return self._record(RunResult(
            name="mc-table",
            success=True,
            elapsed_time=perf_counter() - t0,
            metadata={"reports": reports, "paths": paths},
        ))

    def _write_mc(self, reports: List[McReport], label: str) -> List[str]:
        cfg = self.config
        table = McTableReport(
            q0=list(cfg.q_true),
            sigma=cfg.sigma,
            seed=cfg.seed,
            template=label,
            rows=[McRow(
                m=r.m,
                replicates=r.replicates,
                failures=r.failures,
                mean_qhat=r.mean_qhat.tolist(),
                sd_qhat=r.sd_qhat.tolist(),
                scaled_cov=matrix(r.scaled_cov),
                theoretical_sigma=matrix(r.theoretical_sigma),
                frobenius_rel_error=r.frobenius_rel_error,
                mahalanobis_ks_pvalue=r.mahalanobis_ks_pvalue,
                mean_sigma2_hat=r.mean_sigma2_hat,
            ) for r in reports],
        )
        self.out_dir.mkdir(parents=True, exist_ok=True)
        json_path = self.out_dir / "mc_table.json"
        csv_path = self.out_dir / "replicates.csv"
        json_path.write_text(table.model_dump_json(indent=2))
        write_replicate_table(csv_path, reports)
        return [str(json_path), str(csv_path)]

    def run_gamma(self, tac_path: Optional[PathLike] = None, brac_path: Optional[PathLike] = None) -> RunResult:
        """
        Gamma by quadrature and sigma^2 Gamma^{-1} at the configured q_true.

        With both session paths the BrAC comes from the session and the
        empirical Gamma_n at its TAC times is reported too; otherwise the
        Michaelis-Menten curve of the configuration is used.
        """
        t0 = perf_counter()
        cfg = self.config
        try:
            template = cfg.build_template()
            q0 = cfg.true_q()
            session = None
            if tac_path is not None and brac_path is not None:
                session = load_session(tac_path, brac_path, cfg)
                mu = session.brac
            else:
                mu = self.simulation_brac()

            gamma = gamma_lebesgue(template, q0, mu, cfg.quadrature_nodes)
            sigma_inv = covariance_from(cfg.sigma ** 2, gamma, 1)
            report = GammaReport(
                q0=[q0.q1, q0.q2],
                sigma=cfg.sigma,
                quadrature_nodes=cfg.quadrature_nodes,
                gamma=matrix(gamma),
                sigma2_gamma_inv=matrix(sigma_inv),
                eigenvalues=np.linalg.eigvalsh(gamma).tolist(),
                gamma_n=None if session is None else matrix(gamma_n(template, session, q0)),
            )
            self.out_dir.mkdir(parents=True, exist_ok=True)
            path = self.out_dir / "gamma.json"
            path.write_text(report.model_dump_json(indent=2))
            return self._record(RunResult(
                name="gamma",
                success=True,
                elapsed_time=perf_counter() - t0,
                metadata={"report": report, "paths": [str(path)]},
            ))
        except Exception as e:
            return self._failure("gamma", t0, EXIT_INPUT, e)
