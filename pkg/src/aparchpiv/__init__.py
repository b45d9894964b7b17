"""APARCH(1,1) volatility with standardized Pearson type IV innovations."""

from ._errors import (ConvergenceError, DomainError, MomentDivergenceError, QuadratureError,
                      SingularHessianError)
from .aparch import (PARAM_NAMES, WTI_PARAMS, AparchParams, FilterState, FitOptions,
                     FitResult, aparch_filter, aparch_fit, aparch_loglik, aparch_loglik_terms,
                     aparch_persistence, aparch_robust_se, aparch_simulate)
from .data_io import (ReturnSeries, load_prices_csv, read_report, to_returns, write_report)
from .diagnostics import (LossReport, SummaryStats, acf_pacf, arch_lm, ljung_box,
                          loss_functions, summary_stats)
from .risk import (BacktestRow, HitSequence, TailRow, VarSeries, backtest,
                   christoffersen_independence, conditional_coverage, dq_test, hit_sequence,
                   kupiec_pof, lopez_loss, sarma_losses, tail_measures, var_series)
from .special import adaptive_quad, gamma_ratio_sq, hyp2f1, log_gamma_ratio_sq
from .spiv import (SpivParams, spiv_cdf, spiv_logpdf, spiv_new, spiv_pdf,
                   spiv_power_expectation, spiv_quantile, spiv_sample)

__version__ = "0.1.0"
