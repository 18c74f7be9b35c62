"""
Theory Service
Runs the expected-loss identity, the noise floor and the linear oracle from an
ExperimentConfig and writes a CSV report plus a readable summary
"""
import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from ...shared.configfile import write_resolved_config
from ...shared.entities import ExperimentConfig
from ...shared.exceptions import RankDeficientError
from ...shared.rng import derive_seed, stream
from .families import GaussianImagePrior, OperatorFamily
from .identity import IdentityResult, mc_swap_identity, relative_error, zero_estimator_expectation
from .oracle import FloorResult, OracleResult, linear_oracle, noise_floor_check

logger = logging.getLogger(__name__)

REPORT_NAME = "theory_report.csv"
SUMMARY_NAME = "summary.txt"


@dataclass
class TheoryReport:
    identity: IdentityResult
    zero_estimate: IdentityResult
    zero_expected: float
    floor: FloorResult
    oracle: Optional[OracleResult] = None
    refusal: Optional[str] = None

    @property
    def zero_rel_err(self) -> float:
        return relative_error(self.zero_estimate.lhs, self.zero_expected)

    def rows(self) -> list[tuple[str, float]]:
        rows = [
            ("identity_lhs", self.identity.lhs),
            ("identity_rhs", self.identity.rhs),
            ("identity_rel_err", self.identity.rel_err),
            ("identity_lhs_se", self.identity.lhs_se),
            ("zero_lhs", self.zero_estimate.lhs),
            ("zero_closed_form", self.zero_expected),
            ("zero_rel_err", self.zero_rel_err),
            ("floor_loss", self.floor.loss),
            ("floor_target", self.floor.floor),
            ("floor_se", self.floor.se),
            ("floor_excess", self.floor.excess),
            ("floor_within_band", float(self.floor.within_band)),
            ("floor_passed", float(self.floor.passed)),
        ]
        if self.oracle is not None:
            rows += [
                ("oracle_psnr_swap", self.oracle.psnr_swap),
                ("oracle_psnr_sup", self.oracle.psnr_sup),
                ("oracle_psnr_gap", self.oracle.psnr_gap),
                ("oracle_param_dist", self.oracle.param_dist),
                ("oracle_q_rank", float(self.oracle.report.rank)),
                ("oracle_range_disagreement", self.oracle.range_disagreement),
                ("oracle_null_disagreement", self.oracle.null_disagreement),
            ]
        return rows


class TheoryService:
    """Numerical checks of the swap-loss theory on small explicit operator families"""

    @staticmethod
    def family(config: ExperimentConfig) -> OperatorFamily:
        t = config.theory
        return OperatorFamily.build(
            t.family, t.image_size, t.patch_size, t.measurements, t.family_size,
            seed=derive_seed(config.experiment.seed, "theory-family"),
        )

    @staticmethod
    def prior(config: ExperimentConfig) -> GaussianImagePrior:
        return GaussianImagePrior(config.theory.image_size, config.theory.bandwidth)

    @staticmethod
    def generic_estimator(n: int, seed: int) -> np.ndarray:
        """Random linear map with entries of scale 1/sqrt(N)"""
        return stream(seed, "theory-w").normal(scale=1.0 / np.sqrt(n), size=(n, n))

    def verify(self, config: ExperimentConfig, out_dir: Path) -> TheoryReport:
        t, seed = config.theory, config.experiment.seed
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        family, prior = self.family(config), self.prior(config)
        logger.info(f"🧮 Verifying on the {t.family} family: {len(family)} operators, {family.n_pixels} pixels")

        w = self.generic_estimator(family.n_pixels, seed)
        identity = mc_swap_identity(w, family, prior, t.sigma, t.n_samples, seed=derive_seed(seed, "identity"))
        zero = mc_swap_identity(np.zeros_like(w), family, prior, t.sigma, t.n_samples, seed=derive_seed(seed, "zero"))
        report = TheoryReport(
            identity=identity,
            zero_estimate=zero,
            zero_expected=zero_estimator_expectation(family, prior, t.sigma),
            floor=noise_floor_check(family, prior, t.floor_sigma, t.n_train, t.n_test, seed=derive_seed(seed, "floor")),
        )
        logger.info(f"📊 Identity: lhs {identity.lhs:.6e}, rhs {identity.rhs:.6e}, rel_err {identity.rel_err:.3e}")

        try:
            report.oracle = linear_oracle(
                family, prior, t.sigma, t.n_train, t.n_test,
                seed=derive_seed(seed, "oracle"), allow_rank_deficient=t.allow_rank_deficient,
            )
        except RankDeficientError as e:
            report.refusal = str(e)
            logger.error(f"❌ Linear oracle refused: {report.refusal}")
            self._write(report, config, out_dir)
            raise

        self._write(report, config, out_dir)
        logger.info(f"✅ Theory report written to {out_dir}")
        return report

    @staticmethod
    def _write(report: TheoryReport, config: ExperimentConfig, out_dir: Path) -> None:
        with open(out_dir / REPORT_NAME, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(["quantity", "value"])
            writer.writerows((name, f"{value:.10e}") for name, value in report.rows())
        lines = [f"family = {config.theory.family}"]
        lines += [f"{name} = {value:.6e}" for name, value in report.rows()]
        if report.refusal is not None:
            lines.append(f"oracle_refused = {report.refusal}")
        (out_dir / SUMMARY_NAME).write_text("\n".join(lines) + "\n", encoding="utf-8")
        write_resolved_config(config, out_dir)


# Global service instance
theory_service = TheoryService()
