"""Aggregate welfare per regime, the W(BM) - W(B) decomposition, and welfare sensitivities.

Welfare of a financed type is mu(theta) - 1 - (1 - lambda) m q, where q is the
default probability under the contract the type actually takes. A regime is
laid out as a list of type segments, each served by one financier; every
aggregate is a Gauss-Legendre quadrature over those segments.
"""
from dataclasses import dataclass, replace
from typing import List, Optional

import numpy as np

from src.part2.contracts import Contract
from src.part3.bank_solver import COLLATERAL_BOUND, BankMenu, bank_menu
from src.part4.market_solver import MarketOnlyRegime, solve_market_only
from src.part5.equilibrium import (ALL_BANK, ALL_MARKET, COEXISTENCE, Equilibrium, EquilibriumConfig,
                                   solve_equilibrium)
from src.utils.errors import AllUnfinanceable, DomainError, MarketUnravels
from src.utils.logger_config import setup_solver_logger
from src.utils.numerics import bisect_root, mapped_nodes

logger = setup_solver_logger(name="Welfare")

REGIME_B = "B"
REGIME_M = "M"
REGIME_BM = "BM"
WELFARE_REGIMES = (REGIME_B, REGIME_M, REGIME_BM)


@dataclass(frozen=True, eq=False)
class Segment:
    """Types in [lo, hi] served by one financier."""
    lo: float
    hi: float
    lambda_: float
    side: str
    menu: Optional[BankMenu] = None
    contract: Optional[Contract] = None

    def contracts(self, thetas):
        if self.menu is not None:
            return self.menu.contract_at(thetas)
        return np.full(thetas.shape, self.contract.d), np.full(thetas.shape, self.contract.m)


@dataclass(frozen=True)
class WelfareReport:
    regime: str
    gross_surplus: float
    deadweight: float
    total: float
    financed_measure: float
    private_surplus: float

    @classmethod
    def empty(cls, regime: str) -> "WelfareReport":
        return cls(regime, 0.0, 0.0, 0.0, 0.0, 0.0)


def layout(regime: str, solved, cfg: EquilibriumConfig) -> List[Segment]:
    """Segments of a solved regime; an unsolved (None) regime has none."""
    hi = cfg.theta_hi
    if solved is None:
        return []
    if regime == REGIME_B:
        if solved.ir_cutoff >= hi:
            return []
        return [Segment(solved.ir_cutoff, hi, solved.lambda_b, "bank", menu=solved)]
    if regime == REGIME_M:
        mc = solved.contract
        if not mc.feasible:
            return []
        return [Segment(solved.participation_cutoff, hi, mc.lambda_m, "market", contract=mc.contract)]
    if regime == REGIME_BM:
        eq = solved
        segments = []
        if eq.regime in (ALL_BANK, COEXISTENCE) and eq.star_cutoff > eq.ir_cutoff:
            segments.append(Segment(eq.ir_cutoff, eq.star_cutoff, cfg.lambda_b, "bank", menu=eq.bank_menu))
        if eq.regime in (ALL_MARKET, COEXISTENCE) and eq.market_contract is not None and eq.star_cutoff < hi:
            segments.append(Segment(eq.star_cutoff, hi, cfg.lambda_m, "market", contract=eq.market_contract.contract))
        return segments
    raise DomainError(f"unknown welfare regime '{regime}', expected one of {WELFARE_REGIMES}")


def _pointwise(cfg: EquilibriumConfig, seg: Segment, thetas: np.ndarray) -> dict:
    fam = cfg.fam
    d, m = seg.contracts(thetas)
    surv = np.asarray(fam.survivor(d, thetas))
    q = 1.0 - surv
    lam = seg.lambda_
    return {
        "gross": np.asarray(fam.mean(thetas)) - 1.0,
        "deadweight": (1.0 - lam) * m * q,
        "private": np.asarray(fam.partial_expectation(d, thetas)) - m * q + d * surv + lam * m * q - 1.0,
        "mq": m * q,
    }


def _integrate(cfg: EquilibriumConfig, seg: Segment, lo: float, hi: float, key) -> float:
    """Integral of a pointwise quantity (a key or a callable on the pointwise dict) against dF."""
    if hi <= lo:
        return 0.0
    nodes, weights = mapped_nodes(lo, hi, cfg.settings.quadrature_order)
    values = _pointwise(cfg, seg, nodes)
    integrand = key(values) if callable(key) else values[key]
    return float(np.sum(weights * np.asarray(cfg.dist.pdf(nodes)) * integrand))


def welfare_of_layout(regime: str, segments: List[Segment], cfg: EquilibriumConfig) -> WelfareReport:
    if not segments:
        return WelfareReport.empty(regime)
    gross = sum(_integrate(cfg, s, s.lo, s.hi, "gross") for s in segments)
    dead = sum(_integrate(cfg, s, s.lo, s.hi, "deadweight") for s in segments)
    private = sum(_integrate(cfg, s, s.lo, s.hi, "private") for s in segments)
    measure = sum(cfg.dist.mass(s.lo, s.hi) for s in segments)
    return WelfareReport(regime, gross, dead, gross - dead, measure, private)


def regime_welfare(regime: str, solved, cfg: EquilibriumConfig) -> WelfareReport:
    """W(R) for R in {B, M, BM} from the regime's solved object (BankMenu, MarketOnlyRegime, Equilibrium)."""
    return welfare_of_layout(regime, layout(regime, solved, cfg), cfg)


def welfare_density(segments: List[Segment], cfg: EquilibriumConfig):
    """theta -> (mu - 1 - deadweight) f(theta), zero outside the financed set; vectorised for oracle sums."""
    def density(thetas):
        thetas = np.asarray(thetas, dtype=float)
        out = np.zeros_like(thetas)
        for s in segments:
            inside = (thetas >= s.lo) & (thetas <= s.hi)
            if np.any(inside):
                vals = _pointwise(cfg, s, thetas[inside])
                out[inside] = (vals["gross"] - vals["deadweight"]) * np.asarray(cfg.dist.pdf(thetas[inside]))
        return out
    return density


def solve_regime(regime: str, cfg: EquilibriumConfig):
    """Solved object for a regime, or None when the regime finances nobody."""
    try:
        if regime == REGIME_B:
            return bank_menu(cfg.fam, cfg.dist, cfg.lambda_b, cfg.a_bar, settings=cfg.settings)
        if regime == REGIME_M:
            return solve_market_only(cfg.fam, cfg.dist, cfg.lambda_m, cfg.a_bar, cfg.settings)
    except (AllUnfinanceable, MarketUnravels) as exc:
        logger.warning(f"Regime {regime} finances nobody: {exc}")
        return None
    if regime == REGIME_BM:
        return solve_equilibrium(cfg)
    raise DomainError(f"unknown welfare regime '{regime}', expected one of {WELFARE_REGIMES}")


@dataclass(frozen=True)
class Decomposition:
    liquidation_penalty: float
    screening_relief: float
    extensive_margin: float
    total_diff: float
    direct_difference: float


def _segment_at(segments, theta):
    for s in segments:
        if s.lo <= theta <= s.hi:
            return s
    return None


def _piecewise_integral(cfg, segments_a, segments_b, lo, hi, key_a, key_b, points) -> float:
    """Integral of key_a under layout A minus key_b under layout B over [lo, hi], split at every breakpoint."""
    cuts = sorted({lo, hi, *[p for p in points if lo < p < hi]})
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        mid = 0.5 * (a + b)
        sa, sb = _segment_at(segments_a, mid), _segment_at(segments_b, mid)
        if sa is not None:
            total += _integrate(cfg, sa, a, b, key_a)
        if sb is not None:
            total -= _integrate(cfg, sb, a, b, key_b)
    return total


def _net(values):
    return values["gross"] - values["deadweight"]


def decompose(bank_only: Optional[BankMenu], coexistence: Equilibrium, cfg: EquilibriumConfig) -> Decomposition:
    """Split W(BM) - W(B) into liquidation penalty, screening relief and extensive margin.

    A missing bank-only regime (None) finances nobody, so every financed type
    in BM lands in the extensive margin.
    """
    seg_b = layout(REGIME_B, bank_only, cfg)
    seg_bm = layout(REGIME_BM, coexistence, cfg)
    w_b = welfare_of_layout(REGIME_B, seg_b, cfg)
    w_bm = welfare_of_layout(REGIME_BM, seg_bm, cfg)
    total = w_bm.total - w_b.total

    hi = cfg.theta_hi
    low_b = seg_b[0].lo if seg_b else hi
    low_bm = seg_bm[0].lo if seg_bm else hi
    breakpoints = [s.lo for s in seg_b + seg_bm] + [s.hi for s in seg_b + seg_bm]

    # H: types served by the market in BM that the bank finances in B
    market_bm = [s for s in seg_bm if s.side == "market"]
    penalty = 0.0
    if market_bm and seg_b:
        h_lo = max(market_bm[0].lo, low_b)
        penalty = _piecewise_integral(cfg, seg_b, market_bm, h_lo, hi, "deadweight", "deadweight", breakpoints)

    if low_bm < low_b:
        extensive = _piecewise_integral(cfg, seg_bm, [], low_bm, low_b, _net, _net, breakpoints)
    elif low_bm > low_b:
        extensive = -_piecewise_integral(cfg, seg_b, [], low_b, low_bm, _net, _net, breakpoints)
    else:
        extensive = 0.0

    lo = min(low_b, low_bm)
    direct = _piecewise_integral(cfg, seg_bm, seg_b, lo, hi, _net, _net, breakpoints)
    screening = total - penalty - extensive
    logger.debug(f"Decomposition: total {total:.9g} = penalty {penalty:.9g} + screening {screening:.9g} "
                 f"+ extensive {extensive:.9g}")
    return Decomposition(penalty, screening, extensive, total, direct)


@dataclass(frozen=True)
class RegimeComparison:
    difference: float
    extensive_gain: float
    intensive_loss: float
    condition_holds: bool
    collateral_binds_near_cutoff: bool
    welfare_bank: WelfareReport
    welfare_market: WelfareReport


def compare_bank_vs_market(bank_only: Optional[BankMenu], market_only: Optional[MarketOnlyRegime],
                           cfg: EquilibriumConfig) -> RegimeComparison:
    """W(B) - W(M) and the sufficient condition: extensive gain below the intensive deadweight gap."""
    seg_b = layout(REGIME_B, bank_only, cfg)
    seg_m = layout(REGIME_M, market_only, cfg)
    w_b = welfare_of_layout(REGIME_B, seg_b, cfg)
    w_m = welfare_of_layout(REGIME_M, seg_m, cfg)

    extensive_gain, intensive_loss, binds = 0.0, 0.0, False
    if seg_b and seg_m:
        bank_lo, market_lo = seg_b[0].lo, seg_m[0].lo
        if market_lo < bank_lo:
            extensive_gain = _integrate(cfg, seg_m[0], market_lo, bank_lo, "gross")
        intensive_loss = _piecewise_integral(cfg, seg_m, seg_b, bank_lo, cfg.theta_hi,
                                             "deadweight", "deadweight", [market_lo])
        mask = bank_only.financed_mask()
        first = int(np.argmax(mask)) if mask.any() else None
        binds = first is not None and bank_only.solutions[first].branch == COLLATERAL_BOUND

    return RegimeComparison(
        difference=w_b.total - w_m.total,
        extensive_gain=extensive_gain,
        intensive_loss=intensive_loss,
        condition_holds=extensive_gain < intensive_loss,
        collateral_binds_near_cutoff=binds,
        welfare_bank=w_b,
        welfare_market=w_m,
    )


def expected_loss_wedge(delta: float, m: float, q: float) -> float:
    """Extra expected liquidation loss from a recovery gap delta on collateral m defaulting with probability q."""
    if delta < 0 or m < 0 or q < 0:
        raise DomainError("expected loss wedge needs nonnegative inputs")
    if delta > 1 or q > 1:
        raise DomainError("recovery gap and default probability cannot exceed one")
    return delta * m * q


@dataclass(frozen=True)
class LambdaSensitivity:
    side: str
    step: float
    direct: float
    reallocation: float
    total: float
    regime_changed: bool


def _lambda_field(side: str) -> str:
    if side not in ("bank", "market"):
        raise DomainError(f"unknown financier side '{side}'")
    return "lambda_b" if side == "bank" else "lambda_m"


def welfare_lambda_sensitivity(cfg: EquilibriumConfig, regime: str, step: float = 5e-3, side: str = "bank",
                               partition: str = "fixed") -> LambdaSensitivity:
    """Welfare response to raising the active financier's lambda.

    ``fixed`` holds contracts and cutoffs and changes only the deadweight weight.
    ``endogenous`` re-solves the regime and reports the re-solve on top of the
    direct effect as reallocation.
    """
    if partition not in ("fixed", "endogenous"):
        raise DomainError(f"partition must be 'fixed' or 'endogenous', got '{partition}'")
    name = _lambda_field(side)
    current = getattr(cfg, name)
    if current + step > 1:
        logger.warning(f"{name}={current} cannot rise by {step}; clipping the step to {1 - current:.3g}")
        step = 1.0 - current

    solved = solve_regime(regime, cfg)
    segments = layout(regime, solved, cfg)
    base = welfare_of_layout(regime, segments, cfg)
    raised = [replace(s, lambda_=s.lambda_ + step) if s.side == side else s for s in segments]
    direct = welfare_of_layout(regime, raised, cfg).total - base.total
    if partition == "fixed" or step == 0:
        return LambdaSensitivity(side, step, direct, 0.0, direct, False)

    moved_cfg = replace(cfg, **{name: current + step})
    moved_solved = solve_regime(regime, moved_cfg)
    moved = regime_welfare(regime, moved_solved, moved_cfg)
    changed = regime == REGIME_BM and moved_solved.regime != solved.regime
    if changed:
        logger.warning(f"Raising {name} by {step} moves the equilibrium from {solved.regime} to {moved_solved.regime}")
    total = moved.total - base.total
    return LambdaSensitivity(side, step, direct, total - direct, total, changed)


def welfare_collateral_sensitivity(cfg: EquilibriumConfig, regime: str, step: float = 1e-2) -> float:
    """W(R) at a_bar + step minus W(R) at a_bar."""
    base = regime_welfare(regime, solve_regime(regime, cfg), cfg)
    moved_cfg = replace(cfg, a_bar=cfg.a_bar + step)
    moved = regime_welfare(regime, solve_regime(regime, moved_cfg), moved_cfg)
    return moved.total - base.total


def coexistence_gain(cfg: EquilibriumConfig) -> float:
    """W(BM) - W(B) on the given primitives."""
    menu = solve_regime(REGIME_B, cfg)
    eq = solve_regime(REGIME_BM, cfg)
    return regime_welfare(REGIME_BM, eq, cfg).total - regime_welfare(REGIME_B, menu, cfg).total


def locate_bm_threshold(cfg: EquilibriumConfig, deltas=(0.005, 0.01, 0.02, 0.05, 0.1),
                        tol: float = 1e-9) -> Optional[float]:
    """Largest wedge below which coexistence beats bank-only, or None when it never does on the scan.

    The wedge moves through lambda_m with lambda_b fixed.
    """
    def gain(delta):
        return coexistence_gain(replace(cfg, lambda_m=cfg.lambda_b - delta)) - tol

    deltas = [d for d in sorted(deltas) if 0 < d < cfg.lambda_b]
    gains = [gain(d) for d in deltas]
    if not gains or gains[0] <= 0:
        return None
    for (d0, g0), (d1, g1) in zip(zip(deltas, gains), zip(deltas[1:], gains[1:])):
        if g0 > 0 >= g1:
            return bisect_root(gain, d0, d1, xtol=1e-6, maxiter=cfg.settings.max_bisection)
    return deltas[-1]
