"""
Intervalli di confidenza adattivi per il test-and-pool.

BACI: limiti stocastici superiore/inferiore calcolati per replicazione
bootstrap; quando T < v_n il termine non regolare e' maggiorato con sup/inf
su una griglia di spostamenti locali di mu2 (ristretta alla zona non regolare).
PACI: unione di intervalli ottenuti simulando la legge limite per ogni mu2 di
una regione di confidenza per mu2.
"""
import logging
import math

import numpy as np
from joblib import Parallel, delayed
from scipy import optimize
from scipy.stats import norm

from conf.SystemConfiguration import SystemConfig as Config
from model.estimation_logic import EstimationLogic, PointEstimates
from model.interval import BACI, BACI_F, PACI, WALD, Interval
from model.nuisance_fit import NuisanceLogic
from model.tap_logic import TapLogic
from model.var_comps import pool_weights
from utils.num_kernel import NoncentralChiSq, SeedPlan, psd_inv_sqrt
from utils.tap_errors import (
    BudgetError,
    ConfigError,
    DomainError,
    ReplicateFailureError,
    TapError,
    UnsupportedDimensionError,
)

logger = logging.getLogger(__name__)


def loglog(n):
    return math.log(math.log(n))


class ZoneResult:
    def __init__(self, b_star, empty):
        self.b_star = b_star
        self.empty = empty


class VnSelection:
    def __init__(self, v_n, kappa, fallback, counts, used):
        self.v_n = v_n
        self.kappa = kappa
        self.fallback = fallback
        self.counts = counts
        self.used = used


class BaciContext:
    """Quantita' tenute fisse nelle replicazioni: tuning, Sigma_T, caricamento K, contrasto."""

    def __init__(self, tap, n, config):
        vc = tap.varcomps
        self.n = n
        self.f_B = vc.f_B
        self.jac_B = vc.jac_B
        self.T_inv_sqrt = psd_inv_sqrt(vc.Sigma_T)
        L_A, L_B = vc.loadings()
        _, omega_B = pool_weights(tap.tuning.Lambda, vc.jac_A, vc.jac_B)
        self.K = omega_B @ (L_A + L_B)
        self.c = tap.tuning.c_gamma
        self.a = config.contrast_for(tap.l)
        self.alpha = config.alpha
        self.config = config
        self.zone = AdaptiveCiLogic.nonregular_zone(self.c, config.epsilon, tap.l) if self.c > 0 else None

    def standardized(self, G_A, G_B):
        """W2 = -Sigma_T^-1/2 f_B^1/2 J_B (G_A - G_B), una riga per replicazione."""
        return -math.sqrt(self.f_B) * (G_A - G_B) @ self.jac_B.T @ self.T_inv_sqrt.T


class AdaptiveCiLogic:

    @staticmethod
    def nonregular_zone(c_gamma, epsilon, df=1):
        """
        b* = sup{m >= 0 : 1 - F_l(c; m/2) <= 1 - epsilon}; la zona e' [0, b*].
        La potenza del pretest e' non decrescente in m, quindi basta una bisezione.
        """
        if c_gamma <= 0:
            raise DomainError(f"Soglia non positiva: {c_gamma}")
        target = 1.0 - epsilon

        def excess(m):
            return (1.0 - NoncentralChiSq(df, m / 2.0).cdf(c_gamma)) - target

        if excess(0.0) > 0:
            return ZoneResult(0.0, True)
        upper = 1.0
        while excess(upper) <= 0:
            upper *= 2.0
        b_star = optimize.brentq(excess, 0.0, upper, xtol=1e-10)
        return ZoneResult(float(b_star), False)

    @staticmethod
    def wald(value, avar, n, alpha=Config.CI_ALPHA):
        """Intervallo di Wald con varianza asintotica avar di n^1/2(stima - mu)."""
        half = norm.ppf(1.0 - alpha / 2.0) * math.sqrt(max(avar, 0.0) / n)
        return Interval(value - half, value + half, 1.0 - alpha, WALD)

    @staticmethod
    def mu2_grid(center, config, zone=None):
        """Griglia center +- half_width (passo step), con il centro incluso; raggi per l = 2, 3."""
        center = np.atleast_1d(center)
        l = center.size
        if l > Config.MU2_MAX_DIM:
            raise UnsupportedDimensionError(f"Limiti BACI non supportati per l={l} > {Config.MU2_MAX_DIM}")
        offsets = np.arange(-config.mu2_half_width, config.mu2_half_width + config.mu2_step / 2.0,
                            config.mu2_step)
        if l == 1:
            grid = center + offsets[:, None]
        else:
            directions = list(np.eye(l))
            norm_c = np.linalg.norm(center)
            if norm_c > 0:
                directions.insert(0, center / norm_c)
            grid = (center + offsets[:, None, None] * np.array(directions)[None, :, :]).reshape(-1, l)
        if zone is not None:
            keep = np.sum(grid ** 2, axis=1) <= zone.b_star
            grid = np.vstack([center[None, :], grid[keep]])
        return grid

    @staticmethod
    def bound_statistics(ctx, center_A, mu_A_reps, mu_B_reps, T, v_n):
        """
        Limiti U^(b), L^(b) per replicazione; ramo regolare se T >= v_n,
        altrimenti sup/inf sulla griglia locale di mu2.
        """
        root_n = math.sqrt(ctx.n)
        G_A = root_n * (mu_A_reps - center_A)
        G_B = root_n * (mu_B_reps - center_A)
        W2 = ctx.standardized(G_A, G_B)
        Ka = ctx.K.T @ ctx.a
        norm2 = np.sum(W2 ** 2, axis=1)
        lead = G_A @ ctx.a
        if T >= v_n:
            regular = lead - (W2 @ Ka) * (norm2 < ctx.c)
            return regular, regular, "regular"

        W2_bar = W2.mean(axis=0)
        W2_bar_t = W2_bar * float(W2_bar @ W2_bar > ctx.c)
        noise = W2 - W2_bar
        grid = AdaptiveCiLogic.mu2_grid(W2_bar, ctx.config, ctx.zone)
        shifted = grid[None, :, :] + noise[:, None, :]
        h = (shifted @ Ka) * (np.sum(shifted ** 2, axis=2) >= ctx.c) \
            - ((grid @ Ka) * (np.sum(grid ** 2, axis=1) > ctx.c))[None, :]
        base = lead - W2 @ Ka + W2_bar_t @ Ka
        return base + h.max(axis=1), base + h.min(axis=1), "sup"

    @staticmethod
    def _interval(point_a, U, L, ctx, method, diagnostics):
        root_n = math.sqrt(ctx.n)
        q_upper = np.quantile(U, 1.0 - ctx.alpha / 2.0)
        q_lower = np.quantile(L, ctx.alpha / 2.0)
        return Interval(point_a - q_upper / root_n, point_a - q_lower / root_n, 1.0 - ctx.alpha,
                        method, diagnostics)

    @staticmethod
    def baci(data, estimand, tap, config, v_n=None, kappa=None):
        """Intervallo BACI per a^T mu; con v_n assente lo fissa secondo config.vn_mode."""
        if config.B < Config.BACI_B_MIN:
            raise ConfigError(f"B={config.B} insufficiente (minimo {Config.BACI_B_MIN})")
        method = BACI_F
        if v_n is None:
            if config.vn_mode == Config.VN_DOUBLE:
                selection = AdaptiveCiLogic.select_vn_double_bootstrap(data, estimand, tap, config)
                v_n, kappa, method = selection.v_n, selection.kappa, BACI
            else:
                v_n = loglog(data.n)
        elif kappa is not None:
            method = BACI

        ctx = BaciContext(tap, data.n, config)
        reps = EstimationLogic.bootstrap_replicates(
            data, estimand, [tap.strategy], config.B, config.seed, purpose=Config.STREAM_BACI,
            refit=config.refit_nuisance, fits={tap.strategy: tap.fit}, n_jobs=config.n_jobs)
        U, L, branch = AdaptiveCiLogic.bound_statistics(ctx, tap.mu_A, reps.mu_A, reps.mu_B[tap.strategy],
                                                        tap.T, v_n)
        diagnostics = {"v_n": v_n, "kappa": kappa, "pooled": tap.pooled, "dropped": reps.dropped,
                       "branch": branch}
        interval = AdaptiveCiLogic._interval(float(ctx.a @ tap.point), U, L, ctx, method, diagnostics)
        logger.info("%s: %s (v_n=%.3f, ramo %s)", method, interval, v_n, branch)
        return interval

    @staticmethod
    def _double_replicate(data, estimand, tap, ctx, plan, index, target):
        boot = data.resample(plan.stream(index, Config.STREAM_DOUBLE))
        try:
            fit = NuisanceLogic.fit(boot, estimand, tap.strategy)
            mu_A = EstimationLogic.estimate_mu_A(boot, estimand)
            mu_B = EstimationLogic.estimate_mu_B(boot, estimand, fit)
            jac_A, jac_B = EstimationLogic.jacobians(boot, estimand, fit)
            point = PointEstimates(mu_A, mu_B, fit, jac_A, jac_B)
            eta = TapLogic.eta_hat(boot, estimand, mu_A, fit)
            T = TapLogic.quadratic_form(eta, tap.varcomps.Sigma_T)
            pooled = T < tap.tuning.c_gamma
            value = EstimationLogic.estimate_pooled(point, tap.tuning.Lambda) if pooled else mu_A
            # secondo ordine: disturbi fissati al fit del primo ordine
            reps = EstimationLogic.bootstrap_replicates(
                boot, estimand, [tap.strategy], ctx.config.B2, plan.child_seed(index, Config.STREAM_DOUBLE),
                purpose=Config.STREAM_DOUBLE, refit=False, fits={tap.strategy: fit})
        except TapError as e:
            logger.debug("Replicazione di primo ordine %d scartata: %s", index, e)
            return None

        covered = []
        for kappa in ctx.config.kappa_grid:
            U, L, _ = AdaptiveCiLogic.bound_statistics(ctx, mu_A, reps.mu_A, reps.mu_B[tap.strategy], T,
                                                       kappa * loglog(ctx.n))
            interval = AdaptiveCiLogic._interval(float(ctx.a @ value), U, L, ctx, BACI, {})
            covered.append(interval.covers(target))
        return covered

    @staticmethod
    def select_vn_double_bootstrap(data, estimand, tap, config):
        """
        v_n = kappa* log log n con kappa* il piu' piccolo kappa della griglia la
        cui copertura di primo ordine supera 1 - alpha; la verita' del mondo
        bootstrap e' a^T mu_A dei dati originali.
        """
        if config.B2 < Config.DOUBLE_B2_MIN:
            raise ConfigError(f"B2={config.B2} insufficiente (minimo {Config.DOUBLE_B2_MIN})")
        if config.B1 * config.B2 > config.budget_max:
            raise BudgetError(f"Costo B1 x B2 = {config.B1 * config.B2} oltre il tetto {config.budget_max}")

        ctx = BaciContext(tap, data.n, config)
        target = float(ctx.a @ tap.mu_A)
        plan = SeedPlan(config.seed)
        results = Parallel(n_jobs=config.n_jobs, prefer="threads")(
            delayed(AdaptiveCiLogic._double_replicate)(data, estimand, tap, ctx, plan, b, target)
            for b in range(config.B1)
        )
        kept = [r for r in results if r is not None]
        dropped = config.B1 - len(kept)
        if dropped > Config.REPLICATE_FAILURE_MAX * config.B1:
            raise ReplicateFailureError(dropped, config.B1, Config.REPLICATE_FAILURE_MAX)

        counts = np.sum(np.array(kept, dtype=bool), axis=0).astype(int)
        count_map = dict(zip(config.kappa_grid, counts.tolist()))
        if np.any(np.diff(counts) < 0):
            logger.warning("⚠️ Copertura c(kappa) non monotona: %s", count_map)

        adequate = [k for k, c in count_map.items() if c / len(kept) > 1.0 - config.alpha]
        fallback = not adequate
        kappa = adequate[0] if adequate else config.kappa_grid[-1]
        if fallback:
            logger.warning("⚠️ Nessun kappa raggiunge la copertura nominale: uso kappa=%g", kappa)
        v_n = kappa * loglog(data.n)
        logger.info("Doppio bootstrap: kappa=%g, v_n=%.4f, coperture %s", kappa, v_n, count_map)
        return VnSelection(v_n, kappa, fallback, count_map, len(kept))

    @staticmethod
    def _paci_point(mu2, tap, config, plan, index, a, root_n, alpha_1):
        draws = TapLogic.simulate_limit(mu2, tap.tuning, tap.varcomps, config.paci_draws,
                                        plan.stream(index, Config.STREAM_PACI))
        s = draws @ a
        point_a = float(a @ tap.point)
        return (point_a - np.quantile(s, 1.0 - alpha_1 / 2.0) / root_n,
                point_a - np.quantile(s, alpha_1 / 2.0) / root_n)

    @staticmethod
    def paci(data, tap, config, v_n=None):
        """
        Proiezione: unione degli intervalli per mu2 nella regione
        mu2_hat +- z_{1 - alpha2/2}; se T >= v_n basta l'intervallo in mu2_hat.
        """
        l = tap.l
        if l > Config.MU2_MAX_DIM:
            raise UnsupportedDimensionError(f"PACI non supportato per l={l}")
        v_n = loglog(data.n) if v_n is None else v_n
        alpha_1, alpha_2 = config.alpha_tilde
        a = config.contrast_for(l)
        mu2_hat = -psd_inv_sqrt(tap.varcomps.Sigma_T) @ tap.eta_hat

        if tap.T >= v_n:
            grid = mu2_hat[None, :]
        else:
            z = norm.ppf(1.0 - alpha_2 / 2.0)
            per_axis = config.paci_grid_points if l == 1 else max(5, int(round(config.paci_grid_points ** (1.0 / l))))
            axes = [np.linspace(m - z, m + z, per_axis) for m in mu2_hat]
            grid = np.array(np.meshgrid(*axes, indexing="ij")).reshape(l, -1).T

        plan = SeedPlan(config.seed)
        root_n = math.sqrt(data.n)
        bounds = Parallel(n_jobs=config.n_jobs, prefer="threads")(
            delayed(AdaptiveCiLogic._paci_point)(mu2, tap, config, plan, j, a, root_n, alpha_1)
            for j, mu2 in enumerate(grid)
        )
        bounds = np.array(bounds)
        interval = Interval(bounds[:, 0].min(), bounds[:, 1].max(), config.level, PACI,
                            {"v_n": v_n, "grid_points": int(grid.shape[0]), "pooled": tap.pooled})
        logger.info("PACI: %s su %d punti", interval, grid.shape[0])
        return interval

    @staticmethod
    def interval_battery(data, estimand, tap, config, methods):
        """Intervalli richiesti per a^T mu: 'wald' (su mu_A), 'baci-f', 'baci', 'paci'."""
        intervals = {}
        selection = None
        a = config.contrast_for(tap.l)
        for method in methods:
            if method == "wald":
                avar = float(a @ tap.varcomps.V_A @ a)
                intervals[method] = AdaptiveCiLogic.wald(float(a @ tap.mu_A), avar, data.n, config.alpha)
            elif method == "baci-f":
                intervals[method] = AdaptiveCiLogic.baci(data, estimand, tap, config, v_n=loglog(data.n))
            elif method == "baci":
                selection = selection or AdaptiveCiLogic.select_vn_double_bootstrap(data, estimand, tap, config)
                intervals[method] = AdaptiveCiLogic.baci(data, estimand, tap, config, v_n=selection.v_n,
                                                         kappa=selection.kappa)
            elif method == "paci":
                v_n = selection.v_n if selection is not None else None
                intervals[method] = AdaptiveCiLogic.paci(data, tap, config, v_n=v_n)
            else:
                raise ConfigError(f"Intervallo sconosciuto: {method}")
        return intervals
