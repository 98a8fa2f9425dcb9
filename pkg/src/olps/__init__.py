"""Online portfolio selection: strategies, a sequential backtester and a CLI."""

from .engine import BacktestResult, CostSpec, Strategy, run_backtest, summarize, truncation_causality_check
from .market import PriceRelativeSequence, load_price_relatives, synthetic_cg86, synthetic_iid
from .registry import catalog, create
from .simplex import log_optimal, project_to_simplex

__version__ = "0.1.0"
