import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime
from pathlib import Path

import numpy as np
import pandas as pd

from src.utils.logger_config import setup_solver_logger
from src.utils.errors import ConfigError, DomainError, NoConvergence, SolverError
from src.utils.scenario import ScenarioConfig, SweepSpec, load_scenario
from src.utils.schemas import MARKET_COLUMNS, SWEEP_VALUE_COLUMNS, validate_table
from src.part3.bank_solver import solve_bank_contract
from src.part5.equilibrium import bank_share, solve_equilibrium, spread_gap_at_cutoff
from src.part6.welfare import (REGIME_B, REGIME_BM, REGIME_M, compare_bank_vs_market, decompose,
                               regime_welfare, solve_regime)
from src.part8.verifier import SolverVerifier

logger = setup_solver_logger(name="Orchestrator")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_CONVERGENCE = 3
EXIT_VERIFY = 4

CSV_OPTIONS = {"index": False, "float_format": "%.9g", "lineterminator": "\n", "encoding": "utf-8"}


def _market_row(mc):
    contract = mc.contract
    return {
        "d_m": contract.d if contract is not None else np.nan,
        "m_m": contract.m if contract is not None else np.nan,
        "pool_lo": mc.pool[0],
        "pool_hi": mc.pool[1],
        "branch": mc.branch,
    }


def _market_frame(rows):
    df = pd.DataFrame(rows, columns=MARKET_COLUMNS)
    return df.astype({"d_m": float, "m_m": float, "pool_lo": float, "pool_hi": float, "branch": str})


def solve_scenario(scenario: ScenarioConfig) -> dict:
    """Every solved object of one scenario: bank-only menu, market-only regime, equilibrium, welfare."""
    cfg = scenario.equilibrium_config()
    menu = solve_regime(REGIME_B, cfg)
    market = solve_regime(REGIME_M, cfg)
    eq = solve_equilibrium(cfg)
    welfare = {
        REGIME_B: regime_welfare(REGIME_B, menu, cfg),
        REGIME_M: regime_welfare(REGIME_M, market, cfg),
        REGIME_BM: regime_welfare(REGIME_BM, eq, cfg),
    }
    return {
        "cfg": cfg,
        "menu": menu,
        "market": market,
        "equilibrium": eq,
        "welfare": welfare,
        "decomposition": decompose(menu, eq, cfg),
        "comparison": compare_bank_vs_market(menu, market, cfg),
    }


def sweep_row(scenario: ScenarioConfig, spec: SweepSpec, value: float) -> dict:
    """One sweep row; a failed solve is recorded in the status column instead of raised."""
    row = {spec.param: float(value), **{col: np.nan for col in SWEEP_VALUE_COLUMNS}}
    row.update(regime="", status="ok")
    try:
        solved = solve_scenario(spec.apply(scenario, value))
    except (ConfigError, DomainError) as exc:
        row["status"] = f"config_error: {exc}"
    except NoConvergence as exc:
        row["status"] = f"no_convergence: {exc}"
    except SolverError as exc:
        row["status"] = f"{type(exc).__name__}: {exc}"
    else:
        eq, welfare = solved["equilibrium"], solved["welfare"]
        row.update(
            theta_star=eq.star_cutoff,
            regime=eq.regime,
            bank_share=bank_share(eq),
            W_B=welfare[REGIME_B].total,
            W_M=welfare[REGIME_M].total,
            W_BM=welfare[REGIME_BM].total,
            spread_gap_at_cutoff=spread_gap_at_cutoff(eq),
        )
    if row["status"] != "ok":
        logger.warning(f"Sweep row {spec.param}={value:.6g} failed: {row['status']}")
    return row


def sweep_threads() -> int:
    raw = os.environ.get("SDE_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        threads = int(raw)
    except ValueError as exc:
        raise ConfigError(f"SDE_THREADS must be a positive integer, got '{raw}'") from exc
    if threads < 1:
        raise ConfigError(f"SDE_THREADS must be a positive integer, got '{raw}'")
    return threads


class SolverPipeline:
    def __init__(self, scenario: ScenarioConfig, output_dir=None):
        self.scenario = scenario
        self.output_dir = Path(output_dir or scenario.output_path)

        # Ensure directories exist
        self.output_dir.mkdir(parents=True, exist_ok=True)

        self.solved = None
        self.tables = {}
        self.execution_log = []

    def _log_stage(self, stage, message):
        """Logs to console/file and captures for final report."""
        clean_msg = f"Stage {stage}: {message}"
        logger.info(clean_msg)
        self.execution_log.append(clean_msg)

    def _write_csv(self, name, df, filename):
        validate_table(name, df)
        path = self.output_dir / filename
        df.to_csv(path, **CSV_OPTIONS)
        return path

    def _run(self, command, action):
        self.execution_log.append("SOLVER EXECUTION REPORT")
        self.execution_log.append("=======================")
        self.execution_log.append(f"Command: {command}")
        self.execution_log.append(f"Timestamp: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}\n")
        try:
            result = action()
            self.execution_log.append("\nSTATUS: SUCCESS")
            return result
        except Exception as e:
            err_msg = f"[CRASH] {command} failed: {str(e)}"
            logger.error(err_msg)
            self.execution_log.append(f"\nSTATUS: FAILED\nError: {type(e).__name__}: {str(e)}")
            raise
        finally:
            self._write_final_report()

    def _solve_stages(self):
        scenario = self.scenario

        # STAGE 1: SOLVE
        solved = solve_scenario(scenario)
        self.solved = solved
        menu, market, eq = solved["menu"], solved["market"], solved["equilibrium"]
        if menu is not None:
            financed = int(menu.financed_mask().sum())
            self._log_stage("1: BANK MENU", f"[DONE] {financed}/{len(menu.thetas)} grid types financed, "
                                             f"IR cutoff {menu.ir_cutoff:.6g}")
        else:
            self._log_stage("1: BANK MENU", "[DONE] bank finances no type")
        if market is not None:
            self._log_stage("2: MARKET ONLY", f"[DONE] participation cutoff {market.participation_cutoff:.6g}, "
                                               f"branch {market.contract.branch}")
        else:
            self._log_stage("2: MARKET ONLY", "[DONE] market unravels")
        self._log_stage("3: EQUILIBRIUM", f"[DONE] regime {eq.regime}, theta_star {eq.star_cutoff:.6g}")

        # STAGE 4: TABLES
        self.tables = self._build_tables(solved)
        written = [self._write_csv(name, df, f"{name}.csv") for name, df in self.tables.items()]
        self._write_summary(solved)
        self._log_stage("4: SAVE", "[DONE] Saved outputs:\n" + "\n".join(f"- {p}" for p in written))
        return solved

    def _build_tables(self, solved):
        cfg, menu, market, eq = solved["cfg"], solved["menu"], solved["market"], solved["equilibrium"]
        if menu is not None:
            bank_df = menu.to_frame()
        else:
            thetas = cfg.dist.support.grid(cfg.settings.menu_size)
            sols = [solve_bank_contract(cfg.fam, float(t), cfg.lambda_b, cfg.a_bar, cfg.settings) for t in thetas]
            bank_df = pd.DataFrame({
                "theta": thetas,
                "d": np.nan,
                "m": np.nan,
                "branch": [s.branch for s in sols],
                "utility": [s.utility for s in sols],
                "default_prob": np.nan,
            })

        rows = []
        if market is not None:
            rows.append(_market_row(market.contract))
        if eq.market_contract is not None:
            rows.append(_market_row(eq.market_contract))

        welfare, parts = solved["welfare"], solved["decomposition"]
        eq_df = pd.DataFrame([{
            "regime": eq.regime,
            "theta_ir": eq.ir_cutoff,
            "theta_star": eq.star_cutoff,
            "W_B": welfare[REGIME_B].total,
            "W_M": welfare[REGIME_M].total,
            "W_BM": welfare[REGIME_BM].total,
            "liquidation_penalty": parts.liquidation_penalty,
            "screening_relief": parts.screening_relief,
            "extensive_margin": parts.extensive_margin,
            "total_diff": parts.total_diff,
        }])
        return {"bank_menu": bank_df, "market": _market_frame(rows), "equilibrium": eq_df}

    def _write_summary(self, solved):
        s, cfg, eq = self.scenario, solved["cfg"], solved["equilibrium"]
        welfare, parts, comparison = solved["welfare"], solved["decomposition"], solved["comparison"]
        lines = [
            "SOLVER SUMMARY",
            "==============",
            f"Family: {s.family_kind} (sigma={s.sigma:g})",
            f"Types: {s.types_kind} on [{s.theta_lo:g}, {s.theta_hi:g}]",
            f"lambda_b={s.lambda_b:g}, lambda_m={s.lambda_m:g}, wedge={cfg.delta:g}, a_bar={s.a_bar:g}",
            "",
            "EQUILIBRIUM",
            "===========",
            f"Regime: {eq.regime}",
            f"IR cutoff: {eq.ir_cutoff:.9g}",
            f"Bank/market cutoff: {eq.star_cutoff:.9g}",
            f"Bank share: {bank_share(eq):.6g}",
            f"Spread gap at cutoff: {spread_gap_at_cutoff(eq):.6g}",
            "",
            "WELFARE",
            "=======",
        ]
        for regime, report in welfare.items():
            lines.append(f"W({regime}) = {report.total:.9g}  (gross {report.gross_surplus:.9g}, "
                         f"deadweight {report.deadweight:.9g}, financed {report.financed_measure:.6g})")
        lines += [
            f"W(BM) - W(B) = {parts.total_diff:.9g}",
            f"- Liquidation penalty: {parts.liquidation_penalty:.9g}",
            f"- Screening relief: {parts.screening_relief:.9g}",
            f"- Extensive margin: {parts.extensive_margin:.9g}",
            f"W(B) - W(M) = {comparison.difference:.9g}",
            f"- Extensive gain of the market: {comparison.extensive_gain:.9g}",
            f"- Intensive deadweight gap: {comparison.intensive_loss:.9g}",
            f"- Sufficient condition holds: {comparison.condition_holds}",
            f"- Collateral binds near the bank cutoff: {comparison.collateral_binds_near_cutoff}",
        ]
        with open(self.output_dir / "summary.txt", "w", encoding="utf-8") as f:
            f.write("\n".join(lines) + "\n")

    def run_solve(self):
        return self._run("solve", self._solve_stages)

    def run_sweep(self, spec: SweepSpec, threads=None):
        def action():
            workers = threads or sweep_threads()
            values = spec.values()
            with ThreadPoolExecutor(max_workers=workers) as pool:
                rows = list(pool.map(lambda v: sweep_row(self.scenario, spec, v), values))
            df = pd.DataFrame(rows, columns=[spec.param, *SWEEP_VALUE_COLUMNS])
            path = self._write_csv(f"sweep:{spec.param}", df, "sweep.csv")
            failed = int((df["status"] != "ok").sum())
            self._log_stage("1: SWEEP", f"[DONE] {len(df)} rows over {spec.param} "
                                        f"({failed} failed, {workers} threads)\n- {path}")
            return df
        return self._run("sweep", action)

    def run_verify(self) -> SolverVerifier:
        def action():
            self._solve_stages()
            verifier = SolverVerifier(self.solved["cfg"], self.scenario.grid_spec(), tables=self.tables)
            verifier.run_all().generate_report(self.output_dir / "verification_report.txt")
            status = "PASS" if verifier.all_passed else "FAIL"
            self._log_stage("5: VERIFY", f"[{status}] {verifier.passed} checks passed, {verifier.failed} failed")
            return verifier
        return self._run("verify", action)

    def _write_final_report(self):
        report_path = self.output_dir / "execution_report.txt"
        with open(report_path, "w", encoding="utf-8") as f:
            f.write("\n".join(self.execution_log))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Secured debt adverse-selection solver")
    commands = parser.add_subparsers(dest="command", required=True)

    def common(sub):
        sub.add_argument("config", help="scenario file (key = value)")
        sub.add_argument("--out", help="output directory (defaults to output.path)")
        sub.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                         help="override a scenario key; repeatable")

    common(commands.add_parser("solve", help="solve one scenario and write the CSV tables"))
    sweep = commands.add_parser("sweep", help="re-solve across a parameter range")
    common(sweep)
    sweep.add_argument("--param", required=True, help="lambda_m, lambda_b, a_bar or sigma")
    sweep.add_argument("--lo", type=float, required=True)
    sweep.add_argument("--hi", type=float, required=True)
    sweep.add_argument("--steps", type=int, required=True)
    common(commands.add_parser("verify", help="hold every solver against its oracle"))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        scenario = load_scenario(args.config, args.set)
        pipeline = SolverPipeline(scenario, args.out)
        if args.command == "solve":
            pipeline.run_solve()
        elif args.command == "sweep":
            pipeline.run_sweep(SweepSpec(args.param, args.lo, args.hi, args.steps))
        elif not pipeline.run_verify().all_passed:
            return EXIT_VERIFY
    except (ConfigError, DomainError) as exc:
        logger.error(f"Configuration error: {exc}")
        return EXIT_CONFIG
    except NoConvergence as exc:
        logger.error(f"Solver did not converge: {exc}")
        return EXIT_CONVERGENCE
    except Exception as exc:
        logger.exception(f"Unexpected failure: {exc}")
        return EXIT_FAILURE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
