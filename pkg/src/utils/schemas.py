"""pandera schemas for every table the pipeline writes."""
import pandas as pd
import pandera as pa
from pandera import Check, Column, DataFrameSchema

from src.part3.bank_solver import COLLATERAL_BOUND, INTERIOR, UNFINANCEABLE, UNSECURED
from src.part4.market_solver import COLLATERAL_CAPPED, INFEASIBLE
from src.part5.equilibrium import REGIMES

BANK_MENU_COLUMNS = ["theta", "d", "m", "branch", "utility", "default_prob"]
MARKET_COLUMNS = ["d_m", "m_m", "pool_lo", "pool_hi", "branch"]
EQUILIBRIUM_COLUMNS = ["regime", "theta_ir", "theta_star", "W_B", "W_M", "W_BM",
                       "liquidation_penalty", "screening_relief", "extensive_margin", "total_diff"]
SWEEP_VALUE_COLUMNS = ["theta_star", "regime", "bank_share", "W_B", "W_M", "W_BM", "spread_gap_at_cutoff", "status"]

_PROBABILITY = Check.in_range(0.0, 1.0)

bank_menu_schema = DataFrameSchema(
    {
        "theta": Column(float),
        "d": Column(float, Check.greater_than_or_equal_to(0.0), nullable=True),
        "m": Column(float, Check.greater_than_or_equal_to(0.0), nullable=True),
        "branch": Column(str, Check.isin([INTERIOR, COLLATERAL_BOUND, UNSECURED, UNFINANCEABLE])),
        "utility": Column(float),
        "default_prob": Column(float, _PROBABILITY, nullable=True),
    },
    checks=Check(lambda df: df["theta"].is_monotonic_increasing, error="theta grid must be increasing"),
    strict=True,
    ordered=True,
)

market_schema = DataFrameSchema(
    {
        "d_m": Column(float, Check.greater_than_or_equal_to(0.0), nullable=True),
        "m_m": Column(float, Check.greater_than_or_equal_to(0.0), nullable=True),
        "pool_lo": Column(float),
        "pool_hi": Column(float),
        "branch": Column(str, Check.isin([INTERIOR, COLLATERAL_CAPPED, UNSECURED, INFEASIBLE])),
    },
    checks=Check(lambda df: df["pool_lo"] <= df["pool_hi"], error="pool bounds reversed"),
    strict=True,
    ordered=True,
)

equilibrium_schema = DataFrameSchema(
    {
        "regime": Column(str, Check.isin(list(REGIMES))),
        "theta_ir": Column(float),
        "theta_star": Column(float),
        "W_B": Column(float),
        "W_M": Column(float),
        "W_BM": Column(float),
        "liquidation_penalty": Column(float),
        "screening_relief": Column(float),
        "extensive_margin": Column(float),
        "total_diff": Column(float),
    },
    strict=True,
    ordered=True,
)


def sweep_schema(param: str) -> DataFrameSchema:
    """Sweep rows; a failed row keeps its parameter value and status, an empty regime and NaN elsewhere."""
    return DataFrameSchema(
        {
            param: Column(float),
            "theta_star": Column(float, nullable=True),
            "regime": Column(str),
            "bank_share": Column(float, _PROBABILITY, nullable=True),
            "W_B": Column(float, nullable=True),
            "W_M": Column(float, nullable=True),
            "W_BM": Column(float, nullable=True),
            "spread_gap_at_cutoff": Column(float, nullable=True),
            "status": Column(str),
        },
        checks=Check(lambda df: df[param].is_monotonic_increasing, error="sweep values must be increasing"),
        strict=True,
        ordered=True,
    )


TABLE_SCHEMAS = {
    "bank_menu": bank_menu_schema,
    "market": market_schema,
    "equilibrium": equilibrium_schema,
}


def validate_table(name: str, df: pd.DataFrame) -> pd.DataFrame:
    """Validate a named table (``sweep:<param>`` for sweeps); raises pandera.errors.SchemaErrors."""
    if name.startswith("sweep:"):
        schema = sweep_schema(name.split(":", 1)[1])
    else:
        schema = TABLE_SCHEMAS[name]
    return schema.validate(df, lazy=True)


def table_errors(name: str, df: pd.DataFrame) -> list:
    """Human-readable schema failures, empty when the table is valid."""
    try:
        validate_table(name, df)
    except pa.errors.SchemaErrors as exc:
        cases = exc.failure_cases
        return [f"{row.column}: {row.check} ({row.failure_case})" for row in cases.itertuples()]
    return []
