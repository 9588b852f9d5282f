"""
Popolazioni sintetiche e campionamento per lo studio Monte Carlo.

Y = 1 + X1 + X2 + u + u^2 + eps, con X1 ~ N(0,1), X2 ~ N(1,1), u, eps ~ N(0,1);
u e' latente. Campioni di Bernoulli indipendenti con
logit(pi_A) = nu_A + .2 X1 + .1 X2 e
logit(pi_B) = nu_B + .1 X1 + .2 X2 + .5 b u / sqrt(n_B obiettivo).
"""
import copy
import logging
import math

import numpy as np
from scipy import optimize
from scipy.special import expit

from conf.SystemConfiguration import SystemConfig as Config
from model.adaptive_ci_logic import AdaptiveCiLogic
from model.estimation_logic import EstimationLogic
from model.sim_config import strategy_of
from model.survey_data import CombinedData, FinitePopulation, NonProbabilitySample, ProbabilitySample
from model.tap_estimate import TapOptions
from model.tap_logic import TapLogic
from utils.num_kernel import SeedPlan
from utils.tap_errors import DomainError, InfeasibleTargetError

logger = logging.getLogger(__name__)


class SimulationLogic:

    @staticmethod
    def generate_population(config, rng):
        N = config.N
        if N < 1000:
            raise DomainError(f"Popolazione troppo piccola: N={N}")
        x1 = rng.standard_normal(N)
        x2 = Config.SIM_X2_MEAN + rng.standard_normal(N)
        u = rng.standard_normal(N)
        eps = rng.standard_normal(N)
        y = 1.0 + x1 + x2 + u + u ** 2 + eps
        X = np.column_stack([np.ones(N), x1, x2])
        return FinitePopulation(X, y, u)

    @staticmethod
    def expected_size(nu, linear):
        return float(expit(nu + linear).sum())

    @staticmethod
    def calibrate_intercept(linear, target, label="nu"):
        """Intercetta nu tale che sum expit(nu + linear) = target (monotona in nu)."""
        if not 0.0 < target < linear.size:
            raise InfeasibleTargetError(f"{label}: numerosita' obiettivo {target} non raggiungibile "
                                        f"su {linear.size} unita'")
        lo, hi = -Config.SIM_NU_BRACKET, Config.SIM_NU_BRACKET

        def gap(nu):
            return SimulationLogic.expected_size(nu, linear) - target

        if gap(lo) > 0 or gap(hi) < 0:
            raise InfeasibleTargetError(f"{label}: obiettivo {target} fuori dall'intervallo di ricerca")
        return optimize.brentq(gap, lo, hi, xtol=1e-10)

    @staticmethod
    def inclusion_probabilities(pop, config):
        X, _ = pop.observed()
        x1, x2 = X[:, 1], X[:, 2]
        a1, a2 = Config.SIM_COEF_A
        b1, b2 = Config.SIM_COEF_B
        lin_A = a1 * x1 + a2 * x2
        # il termine di violazione usa n_B obiettivo, non quello realizzato
        lin_B = b1 * x1 + b2 * x2 + Config.SIM_CONFOUNDER_SCALE * config.b * pop.latent() / math.sqrt(config.target_nB)
        nu_A = SimulationLogic.calibrate_intercept(lin_A, config.target_nA, "nu_A")
        nu_B = SimulationLogic.calibrate_intercept(lin_B, config.target_nB, "nu_B")
        logger.debug("Intercette calibrate: nu_A=%.4f, nu_B=%.4f", nu_A, nu_B)
        return expit(nu_A + lin_A), expit(nu_B + lin_B)

    @staticmethod
    def draw_samples(pop, config, rng):
        pi_A, pi_B = SimulationLogic.inclusion_probabilities(pop, config)
        in_A = rng.random(pop.N) < pi_A
        in_B = rng.random(pop.N) < pi_B
        X, y = pop.observed()
        return CombinedData(ProbabilitySample(X[in_A], y[in_A], 1.0 / pi_A[in_A]),
                            NonProbabilitySample(X[in_B], y[in_B]))

    @staticmethod
    def _varcomps(data, config, point, strategy, seed):
        if config.variance == Config.VARIANCE_PLUGIN:
            return EstimationLogic.variance_plugin(data, config.estimand, point.fit, point)
        return EstimationLogic.variance_bootstrap(data, config.estimand, strategy, config.bootstrap_K, seed,
                                                  point=point)

    @staticmethod
    def run_replicate(config, index):
        """
        Una replicazione: popolazione -> campioni -> batteria di stimatori e
        intervalli. Restituisce un record piatto (valori grezzi).
        """
        plan = SeedPlan(config.seed)
        rng = plan.stream(index, Config.STREAM_SIM)
        estimand = config.estimand
        pop = SimulationLogic.generate_population(config, rng)
        data = SimulationLogic.draw_samples(pop, config, rng)
        truth = float(pop.mu_g(estimand)[0])
        seed = plan.child_seed(index, Config.STREAM_REPLICATE)
        n = data.n
        record = {"replicate": index, "truth": truth, "n_A": data.n_A, "n_B": data.n_B}
        want_wald = "wald" in config.intervals

        def wald(name, value, avar):
            if want_wald:
                interval = AdaptiveCiLogic.wald(value, avar, n, config.baci.alpha)
                record[f"lower:wald:{name}"] = interval.lower
                record[f"upper:wald:{name}"] = interval.upper

        points, varcomps = {}, {}
        for strategy in config.strategies:
            points[strategy] = EstimationLogic.point_estimates(data, estimand, strategy)
            varcomps[strategy] = SimulationLogic._varcomps(data, config, points[strategy], strategy, seed)

        for name in config.estimators:
            strategy = strategy_of(name)
            if name == "A":
                value = float(EstimationLogic.estimate_mu_A(data, estimand)[0])
                vc = varcomps.get(Config.STRATEGY_PSEUDO_ML_OLS_AB)
                if vc is not None:
                    wald(name, value, vc.V_A[0, 0])
            elif name == "naive_B":
                value = float(EstimationLogic.naive_mean(data, estimand)[0])
                wald(name, value, n * EstimationLogic.naive_variance(data, estimand))
            elif name == "bc":
                value = float(points[strategy].mu_B[0])
                wald(name, value, varcomps[strategy].V_B[0, 0])
            elif name.startswith("eff"):
                vc = varcomps[strategy]
                value = float(EstimationLogic.estimate_pooled(points[strategy], vc.Lambda_eff)[0])
                if name == "eff":
                    wald(name, value, vc.pooled_variance(vc.Lambda_eff)[0, 0])
            else:
                opts = TapOptions(variance=config.variance, bootstrap_K=config.bootstrap_K,
                                  fix_c=name == "tap:fix", seed=seed)
                tap = TapLogic.estimate_tap(data, estimand, strategy, opts, point=points[strategy],
                                            varcomps=varcomps[strategy])
                value = float(tap.point[0])
                record[f"T:{name}"] = tap.T
                record[f"lambda:{name}"] = tap.tuning.Lambda
                record[f"c_gamma:{name}"] = tap.tuning.c_gamma
                record[f"pooled:{name}"] = tap.pooled
                if name == "tap":
                    methods = [m for m in config.intervals if m != "wald"]
                    baci = copy.copy(config.baci)
                    baci.seed = seed
                    intervals = AdaptiveCiLogic.interval_battery(data, estimand, tap, baci, methods)
                    for method, interval in intervals.items():
                        record[f"lower:{method}"] = interval.lower
                        record[f"upper:{method}"] = interval.upper
            record[f"est:{name}"] = value
        return record
