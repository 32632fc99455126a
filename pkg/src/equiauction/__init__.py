"""Equilibrium bidding, surplus equity and equitable mechanisms in multi-unit auctions."""
from .distributions import (Beta, Counterexample, SignalDistribution, TruncatedExponential,
                            TruncatedNormal, Uniform, from_config, log_concavity_report,
                            make_counterexample, order_stat_cdf, order_stat_pdf)
from .valuation import Market, V, V_prime, v_tilde, value_ex_post
from .equilibrium import (BidCurve, NoSolution, bid_curve, bid_delta_sensitivity, bid_mixed,
                          bid_payasbid_reserve, bid_payasbid_reserve_slope, bid_slope,
                          bid_uniform, reserve_threshold)
from .equity import (EquityReport, QuadratureWarning, equity_report, ex_post_utilities,
                     meu_verdict, pairwise_dominance, surplus_phi, theory_bounds, wev)
from .mechanism import (MechanismResult, equitable_outcome, equitable_payment, ic_audit,
                        interim_expected_payment)
from .simulate import (AuctionResult, McEstimate, estimate_equitable_revenue,
                       estimate_gini_winners, estimate_revenue, estimate_variance_suite,
                       estimate_wev, regret_audit, run_auction)
from .search import SweepResult, delta_star, landscape_sweep, meu_frontier

__version__ = "0.1.0"
