"""Holds every solver stage against its brute-force oracle and writes a PASS/FAIL report."""
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from src.part1.distributions import pool_moment
from src.part3.bank_solver import INTERIOR, solve_bank_contract
from src.part4.market_solver import solve_market_contract
from src.part5.equilibrium import (ALL_BANK, ALL_MARKET, NO_FINANCE, NO_MONOTONE, SELECTION_TOL, EquilibriumConfig,
                                   EquilibriumSolver)
from src.part6.welfare import (REGIME_B, REGIME_BM, REGIME_M, WELFARE_REGIMES, decompose, layout,
                               solve_regime, welfare_density, welfare_of_layout)
from src.part7.oracle import (DEFAULT_GRID, GridSpec, grid_best_2d, grid_best_on_locus,
                              grid_best_on_pooled_locus, riemann_integral, scan_sign_changes)
from src.utils.errors import AllUnfinanceable, NoFeasiblePoint, SolverError
from src.utils.logger_config import setup_solver_logger
from src.utils.schemas import table_errors

logger = setup_solver_logger(name="Verifier")

ORACLE_TOL = 1e-7
POINT_MASS_TOL = 1e-12
MOMENT_TOL = 1e-6
WELFARE_TOL = 1e-5
CUTOFF_UTILITY_TOL = 1e-8
IDENTITY_TOL = 1e-9
DIRECT_TOL = 1e-6
SIGN_SCAN_POINTS = 100
EDGE_STEP = 1e-9
RIEMANN_POINTS = 100_000


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


class SolverVerifier:
    def __init__(self, cfg: EquilibriumConfig, spec: GridSpec = DEFAULT_GRID, sample_types: int = 5,
                 tables: Optional[Dict[str, pd.DataFrame]] = None):
        self.cfg = cfg
        self.spec = spec
        self.sample_types = sample_types
        self.tables = tables or {}
        self.solver = EquilibriumSolver(cfg)
        self.results: List[CheckResult] = []

    def _record(self, name: str, passed: bool, detail: str):
        self.results.append(CheckResult(name, bool(passed), detail))
        level = logger.debug if passed else logger.warning
        level(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")

    def _sample_thetas(self):
        return np.linspace(self.cfg.theta_lo, self.cfg.theta_hi, self.sample_types)

    def check_bank_oracle(self):
        cfg = self.cfg
        for theta in self._sample_thetas():
            sol = solve_bank_contract(cfg.fam, float(theta), cfg.lambda_b, cfg.a_bar, cfg.settings)
            name = f"bank oracle theta={theta:.4g}"
            try:
                oracle = grid_best_on_locus(cfg.fam, float(theta), cfg.lambda_b, cfg.a_bar, self.spec)
            except NoFeasiblePoint:
                self._record(name, not sol.financed, f"oracle finds no feasible point, solver branch {sol.branch}")
                continue
            gap = sol.utility - oracle.utility
            self._record(name, sol.financed and gap >= -ORACLE_TOL,
                         f"solver {sol.utility:.10g} vs grid {oracle.utility:.10g} ({oracle.clamped_points} clamped)")

        # one full d x m grid at the middle type, independent of the locus formula
        theta = float(np.median(self._sample_thetas()))
        sol = solve_bank_contract(cfg.fam, theta, cfg.lambda_b, cfg.a_bar, cfg.settings)
        try:
            oracle = grid_best_2d(cfg.fam, theta, cfg.lambda_b, cfg.a_bar, self.spec)
        except NoFeasiblePoint:
            self._record("bank 2-D grid", not sol.financed, "no grid contract breaks even")
            return
        self._record("bank 2-D grid", sol.financed and sol.utility >= oracle.utility - ORACLE_TOL,
                     f"solver {sol.utility:.10g} vs 2-D grid {oracle.utility:.10g}")

    def check_bank_residuals(self):
        tol = self.cfg.settings.residual_tolerance
        try:
            menu = self.solver.menu
        except AllUnfinanceable as exc:
            self._record("bank residuals", True, f"no financed type to check ({exc})")
            return
        financed = [s for s, keep in zip(menu.solutions, menu.financed_mask()) if keep]
        zero_profit = max((s.zero_profit_residual for s in financed), default=0.0)
        tangency = max((s.tangency_residual for s in financed if s.branch == INTERIOR), default=0.0)
        self._record("bank zero-profit residual", zero_profit < tol, f"max {zero_profit:.3g} (tolerance {tol:.0e})")
        self._record("bank tangency residual", tangency < tol, f"max {tangency:.3g} (tolerance {tol:.0e})")

    def check_ir_cutoff(self):
        cfg = self.cfg
        try:
            cutoff = self.solver.menu.ir_cutoff
        except AllUnfinanceable:
            self._record("IR cutoff", True, "bank finances no type")
            return
        if not cfg.theta_lo < cutoff < cfg.theta_hi:
            self._record("IR cutoff", True, f"cutoff {cutoff:.9g} sits on the support boundary")
            return
        utility = self.solver.bank_utility(cutoff)
        if abs(utility) < CUTOFF_UTILITY_TOL:
            self._record("IR cutoff", True, f"U_b({cutoff:.9g}) = {utility:.3g}")
            return
        # financeability edge: utility jumps from -inf to a positive value
        below = self.solver.bank_utility(cutoff - EDGE_STEP)
        self._record("IR cutoff", utility > 0 and below == float("-inf"),
                     f"U_b({cutoff:.9g}) = {utility:.3g}, U_b just below = {below:.3g}")

    def check_market(self):
        cfg = self.cfg
        pool = (cfg.theta_lo + 0.25 * (cfg.theta_hi - cfg.theta_lo), cfg.theta_hi)
        mc = solve_market_contract(cfg.fam, cfg.dist, pool, cfg.lambda_m, cfg.a_bar, cfg.settings)
        name = f"market oracle pool=[{pool[0]:.4g}, {pool[1]:.4g}]"
        try:
            oracle = grid_best_on_pooled_locus(cfg.fam, cfg.dist, pool, cfg.lambda_m, cfg.a_bar, self.spec,
                                               cfg.settings.quadrature_order)
        except NoFeasiblePoint:
            self._record(name, not mc.feasible, f"oracle finds no feasible point, solver branch {mc.branch}")
            return
        self._record(name, mc.feasible and mc.utility >= oracle.utility - ORACLE_TOL,
                     f"solver {mc.utility:.10g} vs grid {oracle.utility:.10g}")
        tol = cfg.settings.residual_tolerance
        residual = max(mc.zero_profit_residual, mc.pool_tangency_residual if mc.branch == INTERIOR else 0.0)
        self._record("market residuals", residual < tol, f"max {residual:.3g} (tolerance {tol:.0e})")

    def check_point_mass(self):
        cfg = self.cfg
        theta = float(np.median(self._sample_thetas()))
        bank = solve_bank_contract(cfg.fam, theta, cfg.lambda_b, cfg.a_bar, cfg.settings)
        market = solve_market_contract(cfg.fam, cfg.dist, (theta, theta), cfg.lambda_b, cfg.a_bar, cfg.settings)
        if not bank.financed:
            self._record("point-mass market = bank", not market.feasible, "bank contract infeasible")
            return
        gap = abs(bank.utility - market.utility)
        self._record("point-mass market = bank", gap <= POINT_MASS_TOL, f"|U_b - U_m| = {gap:.3g} at theta={theta:.4g}")

    def check_pool_moments(self):
        cfg = self.cfg
        pool = (cfg.theta_lo, cfg.theta_hi)
        d = float(cfg.fam.mean(float(np.median(self._sample_thetas()))))
        mass = cfg.dist.mass(*pool)
        moments = {"G": cfg.fam.survivor, "pe": cfg.fam.partial_expectation}
        for which, h in moments.items():
            quad = float(pool_moment(cfg.fam, cfg.dist, pool, d, which, cfg.settings.quadrature_order))
            riemann = riemann_integral(lambda t, h=h: cfg.dist.pdf(t) * h(d, t), pool, RIEMANN_POINTS) / mass
            gap = abs(quad - riemann)
            self._record(f"pool moment {which}", gap < MOMENT_TOL, f"quadrature vs Riemann gap {gap:.3g}")

    def _scan_all(self, fn, points) -> np.ndarray:
        return np.array([fn(float(x)) for x in points])

    def check_equilibrium(self):
        eq = self.solver.solve()
        cfg = self.cfg
        if eq.regime == NO_FINANCE or eq.ir_cutoff >= cfg.theta_hi:
            self._record("equilibrium cutoffs", True, f"regime {eq.regime}: the bank finances nobody")
            return eq
        lo, hi = eq.ir_cutoff, cfg.theta_hi
        grid = np.linspace(lo, hi, SIGN_SCAN_POINTS)

        if eq.regime == ALL_BANK:
            phi_ir = self._scan_all(lambda v: self.solver.utility_gap(lo, v), grid)
            self._record("all-bank: lowest type prefers the bank for every pool", np.all(phi_ir > 0),
                         f"min Phi(theta_ir; .) = {phi_ir.min():.3g} over {SIGN_SCAN_POINTS} pools")
            phi_top = self._scan_all(lambda t: self.solver.utility_gap(t, hi), grid)
            self._record("all-bank: no type leaves for the top-type market", np.all(phi_top >= -SELECTION_TOL),
                         f"min Phi(.; theta_hi) = {phi_top.min():.3g}")
            return eq

        if eq.regime == ALL_MARKET:
            phi_top = self._scan_all(lambda v: self.solver.utility_gap(hi, v), grid)
            self._record("all-market: top type prefers the market for every pool", np.all(phi_top < 0),
                         f"max Phi(theta_hi; .) = {phi_top.max():.3g} over {SIGN_SCAN_POINTS} pools")
            phi_pool = self._scan_all(lambda t: self.solver.utility_gap(t, lo), grid)
            self._record("all-market: no type leaves for the bank", np.all(phi_pool < SELECTION_TOL),
                         f"max Phi(.; theta_ir) = {phi_pool.max():.3g}")
            return eq

        star = eq.star_cutoff
        violations = self.solver.selection_violations(star, SIGN_SCAN_POINTS)
        if eq.regime == NO_MONOTONE:
            self._record("no monotone equilibrium: fixed point breaks selection", violations > 0,
                         f"{violations} of {SIGN_SCAN_POINTS} types on the wrong side of {star:.6g}")
            return eq

        gap = abs(self.solver.utility_gap(star, star))
        self._record("indifference at theta_star", gap < CUTOFF_UTILITY_TOL, f"|U_b - U_m| = {gap:.3g}")
        self._record("monotone selection", violations == 0, f"{violations} of {SIGN_SCAN_POINTS} types misplaced")
        gamma = scan_sign_changes(self.solver.gamma, (lo, hi), SIGN_SCAN_POINTS)
        self._record("fixed-point map single crossing", len(gamma) == 1, f"{len(gamma)} sign changes")
        phi = scan_sign_changes(lambda t: self.solver.utility_gap(t, star), (lo, hi), SIGN_SCAN_POINTS)
        self._record("utility gap single crossing", len(phi) == 1, f"{len(phi)} sign changes")
        return eq

    def check_welfare(self, eq=None):
        cfg = self.cfg
        solved = {REGIME_B: solve_regime(REGIME_B, cfg), REGIME_M: solve_regime(REGIME_M, cfg),
                  REGIME_BM: eq if eq is not None else self.solver.solve()}
        for regime in WELFARE_REGIMES:
            segments = layout(regime, solved[regime], cfg)
            quad = welfare_of_layout(regime, segments, cfg).total
            riemann = sum(riemann_integral(welfare_density([s], cfg), (s.lo, s.hi), RIEMANN_POINTS)
                          for s in segments)
            gap = abs(quad - riemann)
            self._record(f"welfare {regime} quadrature", gap < WELFARE_TOL, f"quadrature vs Riemann gap {gap:.3g}")

        parts = decompose(solved[REGIME_B], solved[REGIME_BM], cfg)
        identity = abs(parts.liquidation_penalty + parts.screening_relief + parts.extensive_margin - parts.total_diff)
        direct = abs(parts.direct_difference - parts.total_diff)
        self._record("decomposition identity", identity < IDENTITY_TOL, f"residual {identity:.3g}")
        self._record("decomposition vs direct quadrature", direct < DIRECT_TOL, f"gap {direct:.3g}")

    def check_tables(self):
        for name, df in self.tables.items():
            errors = table_errors(name, df)
            self._record(f"schema {name}", not errors, "; ".join(errors[:3]) if errors else f"{len(df)} rows valid")

    def run_all(self) -> "SolverVerifier":
        logger.info("Running oracle verification...")
        steps = [self.check_bank_oracle, self.check_bank_residuals, self.check_ir_cutoff, self.check_market,
                 self.check_point_mass, self.check_pool_moments]
        for step in steps:
            try:
                step()
            except SolverError as exc:
                self._record(step.__name__.replace("check_", ""), False, f"{type(exc).__name__}: {exc}")
        try:
            eq = self.check_equilibrium()
            self.check_welfare(eq)
        except SolverError as exc:
            self._record("equilibrium and welfare", False, f"{type(exc).__name__}: {exc}")
        self.check_tables()
        return self

    @property
    def passed(self) -> int:
        return sum(r.passed for r in self.results)

    @property
    def failed(self) -> int:
        return len(self.results) - self.passed

    @property
    def all_passed(self) -> bool:
        return bool(self.results) and self.failed == 0

    def generate_report(self, report_path) -> List[str]:
        total = len(self.results)
        rate = 100.0 * self.passed / total if total else 0.0
        report = [
            "VERIFICATION RESULTS",
            "====================",
            f"PASS: {self.passed} checks met",
            f"FAIL: {self.failed} checks failed",
            f"SUCCESS RATE: {rate:.2f}%",
            "",
            "CHECKS:",
            "-------",
        ]
        report += [f"[{'PASS' if r.passed else 'FAIL'}] {r.name}: {r.detail}" for r in self.results]

        failures = [r for r in self.results if not r.passed]
        if failures:
            report += ["", "DETAILED FAILURES:", "------------------"]
            for r in failures:
                report += [f"{r.name}:", f"- Issue: {r.detail}", ""]

        Path(report_path).parent.mkdir(parents=True, exist_ok=True)
        with open(report_path, "w", encoding="utf-8") as f:
            f.write("\n".join(report) + "\n")

        logger.info(f"Verification report saved to {report_path}")
        return report
