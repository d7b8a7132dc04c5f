"""Crisis-gated trading strategy evaluation.

The strategy holds SMB only on days decoded as the crisis regime,
long or short by the sign of the trailing compounded HML return.
The benchmark is buy-and-hold SMB run through the identical code path
with an all-long signal.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .panel import FactorPanel, as_date64

TRADING_DAYS_PER_YEAR = 252


@dataclass(frozen=True)
class BacktestReport:
    """Daily strategy returns plus the three summary metrics.

    annual_return : geometric annualized return, percent
    sharpe        : annualized mean/std of daily returns; None when the
                    return series has zero variance
    max_drawdown  : minimum percent decline of the wealth curve from its
                    running maximum (always <= 0)
    """

    dates: np.ndarray
    daily_returns: np.ndarray
    annual_return: float
    sharpe: float | None
    max_drawdown: float
    n_active_days: int


def strategy_signal(hml, labels, crisis_index: int, window: int = 9) -> np.ndarray:
    """Position series in {-1, 0, +1}.

    On a crisis-labeled day t (with t >= window), the position is the
    sign of the compounded HML return over days t-window..t-1; all other
    days are flat. An exactly zero trailing return is flat as well. The
    signal at t uses data only through t-1, so it is computable at the
    prior close.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    hml = np.asarray(hml, dtype=float).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    if hml.shape != labels.shape:
        raise ValueError("hml and labels must have equal length")
    T = hml.shape[0]
    signal = np.zeros(T)
    growth = np.cumprod(1.0 + hml / 100.0)
    for t in range(window, T):
        if labels[t] != crisis_index:
            continue
        prev = growth[t - window - 1] if t - window - 1 >= 0 else 1.0
        trailing = growth[t - 1] / prev - 1.0
        signal[t] = np.sign(trailing)
    return signal


def apply_signal(signal, target) -> np.ndarray:
    """Elementwise position times target return, in percent."""
    signal = np.asarray(signal, dtype=float).reshape(-1)
    target = np.asarray(target, dtype=float).reshape(-1)
    if signal.shape != target.shape:
        raise ValueError("signal and target must have equal length")
    return signal * target


def performance_metrics(returns, dates=None, n_active_days: int | None = None
                        ) -> BacktestReport:
    """Annualized geometric return, Sharpe ratio, and maximum drawdown.

    With no explicit active-day count, days with nonzero return are
    counted as active.
    """
    returns = np.asarray(returns, dtype=float).reshape(-1)
    T = returns.shape[0]
    if T == 0:
        raise ValueError("return series is empty")
    if dates is None:
        dates = np.arange(T).astype("datetime64[D]")
    dates = np.asarray(dates, dtype="datetime64[D]")
    wealth = np.cumprod(1.0 + returns / 100.0)
    annual = 100.0 * (wealth[-1] ** (TRADING_DAYS_PER_YEAR / T) - 1.0)
    # a constant series has zero variance even when std(ddof=1) returns
    # rounding noise, so test constancy exactly
    if T > 1 and np.ptp(returns) > 0.0:
        sd = returns.std(ddof=1)
        sharpe = float(returns.mean() / sd * math.sqrt(TRADING_DAYS_PER_YEAR))
    else:
        sharpe = None
    drawdown = wealth / np.maximum.accumulate(wealth) - 1.0
    mdd = float(drawdown.min() * 100.0)
    if n_active_days is None:
        n_active_days = int(np.count_nonzero(returns))
    return BacktestReport(
        dates=dates,
        daily_returns=returns,
        annual_return=float(annual),
        sharpe=sharpe,
        max_drawdown=mdd,
        n_active_days=n_active_days,
    )


def run_backtest(panel: FactorPanel, labels, crisis_index: int, *,
                 window: int = 9, hml: str = "HML", smb: str = "SMB",
                 start=None, end=None, execution_lag: int = 0
                 ) -> tuple[BacktestReport, BacktestReport]:
    """Strategy and buy-and-hold benchmark over an optional date range.

    execution_lag=1 applies each signal to the following day's return,
    removing even the same-day convention's timing assumption.
    """
    labels = np.asarray(labels).reshape(-1)
    if labels.shape[0] != panel.n_days:
        raise ValueError("labels must align with the panel rows")
    dates = panel.dates
    keep = np.ones(panel.n_days, dtype=bool)
    if start is not None:
        keep &= dates >= as_date64(start)
    if end is not None:
        keep &= dates <= as_date64(end)
    if not keep.any():
        raise ValueError("date range selects no rows")
    sub_dates = dates[keep]
    hml_r = panel.column(hml)[keep]
    smb_r = panel.column(smb)[keep]
    sub_labels = labels[keep]
    signal = strategy_signal(hml_r, sub_labels, crisis_index, window)
    if execution_lag:
        signal = np.concatenate([np.zeros(execution_lag), signal[:-execution_lag]])
    strat = performance_metrics(
        apply_signal(signal, smb_r), sub_dates,
        n_active_days=int(np.count_nonzero(signal)),
    )
    bench = performance_metrics(
        apply_signal(np.ones_like(smb_r), smb_r), sub_dates,
        n_active_days=smb_r.shape[0],
    )
    return strat, bench


def _report_doc(r: BacktestReport) -> dict:
    return {
        "annual_return": r.annual_return,
        "sharpe": r.sharpe,
        "max_drawdown": r.max_drawdown,
        "n_active_days": r.n_active_days,
        "n_days": int(r.daily_returns.shape[0]),
    }


def write_backtest_json(strategy: BacktestReport, benchmark: BacktestReport,
                        path) -> None:
    doc = {"strategy": _report_doc(strategy), "benchmark": _report_doc(benchmark)}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def write_returns_csv(strategy: BacktestReport, benchmark: BacktestReport,
                      path) -> None:
    """Daily return series of both legs in the canonical panel layout."""
    if strategy.daily_returns.shape != benchmark.daily_returns.shape:
        raise ValueError("strategy and benchmark series differ in length")
    p = FactorPanel(
        strategy.dates,
        np.column_stack([strategy.daily_returns, benchmark.daily_returns]),
        ("STRATEGY", "BENCHMARK"),
    )
    from .panel import write_panel_csv

    write_panel_csv(p, path)
