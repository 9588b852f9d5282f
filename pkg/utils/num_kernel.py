"""
Kernel numerico: funzioni speciali chi-quadro (centrali e non centrali),
momenti della normale troncata su regioni quadratiche, utilita' per matrici
semidefinite positive, ottimizzatore Nelder-Mead multi-start e flussi casuali
riproducibili.

Convenzione di non centralita': delta = mu^T mu / 2, cioe' lambda = 2*delta
nella parametrizzazione standard.
"""
import logging
import math

import numpy as np
from scipy import optimize
from scipy.special import gammainc, gammaln

from conf.SystemConfiguration import SystemConfig as Config
from utils.tap_errors import (
    ConvergenceError,
    DegenerateRegionError,
    DomainError,
    FeasibilityError,
    IndefiniteMatrixError,
    SingularityError,
)

logger = logging.getLogger(__name__)


def _check_df(df):
    if int(df) != df or df < 1:
        raise DomainError(f"Gradi di liberta' non validi: {df}")
    return int(df)


def chisq_cdf(x, df):
    """P(chi2_df <= x) tramite la funzione gamma incompleta regolarizzata."""
    df = _check_df(df)
    if np.isnan(x) or x < 0:
        raise DomainError(f"Argomento negativo per la CDF chi-quadro: {x}")
    if np.isinf(x):
        return 1.0
    return float(gammainc(df / 2.0, x / 2.0))


def noncentral_chisq_cdf(x, df, delta):
    """
    CDF chi-quadro non centrale come serie pesata di Poisson:
    F(x) = exp(-delta) * sum_k delta^k / k! * chisq_cdf(x, df + 2k).

    I termini sono valutati a blocchi in scala logaritmica; la serie si ferma
    quando il contributo relativo e la coda di Poisson scendono sotto 1e-14.
    """
    df = _check_df(df)
    if np.isnan(x) or x < 0:
        raise DomainError(f"Argomento negativo per la CDF non centrale: {x}")
    if np.isnan(delta) or delta < 0:
        raise DomainError(f"Parametro di non centralita' negativo: {delta}")
    if delta == 0:
        return chisq_cdf(x, df)
    if np.isinf(x):
        return 1.0
    if x == 0:
        return 0.0

    log_delta = math.log(delta)
    total = 0.0
    k0 = 0
    while True:
        k = np.arange(k0, k0 + Config.SERIES_CHUNK, dtype=float)
        log_weights = -delta + k * log_delta - gammaln(k + 1.0)
        terms = np.exp(log_weights) * gammainc(df / 2.0 + k, x / 2.0)
        total += float(terms.sum())
        k_last = k[-1]
        tail = float(gammainc(k_last + 1.0, delta))  # P(Poisson(delta) > k_last)
        if (k_last >= delta and tail < Config.SERIES_TAIL_TOL
                and terms[-1] <= Config.SERIES_REL_TOL * total):
            break
        k0 += Config.SERIES_CHUNK
        if k0 >= Config.SERIES_MAX_TERMS:
            raise ConvergenceError(
                f"Serie non centrale non convergente dopo {k0} termini "
                f"(x={x}, df={df}, delta={delta})"
            )
    logger.debug("Serie non centrale: %d termini (df=%d, delta=%.4g)", k0 + Config.SERIES_CHUNK, df, delta)
    return min(max(total, 0.0), 1.0)


def chisq_quantile(p, df):
    """Quantile chi-quadro per bracketing (raddoppio) e Brent."""
    df = _check_df(df)
    if not 0.0 < p < 1.0:
        raise DomainError(f"Probabilita' fuori da (0, 1): {p}")
    upper = 2.0 * df
    while chisq_cdf(upper, df) < p:
        upper *= 2.0
    return float(optimize.brentq(lambda t: chisq_cdf(t, df) - p, 0.0, upper,
                                 xtol=Config.QUANTILE_TOL, rtol=4 * np.finfo(float).eps))


class NoncentralChiSq:
    """Legge chi-quadro non centrale con la convenzione delta = mu^T mu / 2."""

    def __init__(self, df, delta):
        self.df = _check_df(df)
        if delta < 0:
            raise DomainError(f"Parametro di non centralita' negativo: {delta}")
        self.delta = float(delta)

    @classmethod
    def from_mean(cls, mu, df=None):
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        return cls(df if df is not None else mu.size, float(mu @ mu) / 2.0)

    def cdf(self, x):
        return noncentral_chisq_cdf(x, self.df, self.delta)

    def sf(self, x):
        return 1.0 - self.cdf(x)

    def interval_mass(self, lower, upper):
        return self.cdf(upper) - self.cdf(lower)


class TruncRegion:
    """Regione {w : lower <= w^T w <= upper}."""

    def __init__(self, lower=0.0, upper=np.inf):
        if lower < 0 or not lower < upper:
            raise DomainError(f"Regione di troncamento non valida: [{lower}, {upper}]")
        self.lower = float(lower)
        self.upper = float(upper)

    def contains(self, w):
        w = np.asarray(w, dtype=float)
        norm2 = np.sum(w * w, axis=-1)
        return (norm2 >= self.lower) & (norm2 <= self.upper)

    def mass(self, mu2):
        mu2 = np.atleast_1d(np.asarray(mu2, dtype=float))
        return NoncentralChiSq.from_mean(mu2).interval_mass(self.lower, self.upper)

    def __repr__(self):
        return f"TruncRegion([{self.lower}, {self.upper}])"


def partial_moments(mu2, region):
    """
    Momenti non normalizzati di W ~ N(mu2, I) sulla regione:
    (P(W in R), E[W 1{W in R}], E[W W^T 1{W in R}]).
    """
    mu2 = np.atleast_1d(np.asarray(mu2, dtype=float))
    l = mu2.size
    delta = float(mu2 @ mu2) / 2.0
    masses = {}
    for df in (l, l + 2, l + 4):
        law = NoncentralChiSq(df, delta)
        masses[df] = law.interval_mass(region.lower, region.upper)
    mass = masses[l]
    first = mu2 * masses[l + 2]
    second = np.eye(l) * masses[l + 2] + np.outer(mu2, mu2) * masses[l + 4]
    return mass, first, second


def trunc_moments(mu2, region):
    """
    Media e momento secondo di N(mu2, I) condizionata a lower <= w^T w <= upper.

    Returns:
        (mean, second_moment, mass)
    """
    mass, first, second = partial_moments(mu2, region)
    if mass <= Config.TRUNC_MASS_MIN:
        raise DegenerateRegionError(f"Massa di troncamento degenere ({mass:.3e}) su {region}")
    second = second / mass
    return first / mass, (second + second.T) / 2.0, mass


def _symmetric_eig(M):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[0] != M.shape[1]:
        raise DomainError(f"Matrice non quadrata: {M.shape}")
    sym = (M + M.T) / 2.0
    eigval, eigvec = np.linalg.eigh(sym)
    scale = max(float(np.max(np.abs(eigval))), np.finfo(float).tiny) if eigval.size else 1.0
    return eigval, eigvec, scale


def psd_sqrt(M):
    """Radice quadrata simmetrica di una matrice PSD (autovalori negativi piccoli azzerati)."""
    eigval, eigvec, scale = _symmetric_eig(M)
    if eigval.min() < -Config.PSD_EIG_TOL * scale:
        raise IndefiniteMatrixError(f"Matrice indefinita: autovalore minimo {eigval.min():.3e}")
    root = (eigvec * np.sqrt(np.clip(eigval, 0.0, None))) @ eigvec.T
    return (root + root.T) / 2.0


def psd_inv_sqrt(M):
    """Inversa della radice simmetrica; richiede una matrice definita positiva."""
    eigval, eigvec, scale = _symmetric_eig(M)
    if eigval.min() <= Config.PSD_EIG_TOL * scale:
        raise SingularityError(f"Matrice non definita positiva: autovalore minimo {eigval.min():.3e}")
    root = (eigvec / np.sqrt(eigval)) @ eigvec.T
    return (root + root.T) / 2.0


def nearest_psd(M):
    """
    Proiezione sulla matrice PSD piu' vicina (in norma di Frobenius) azzerando
    gli autovalori negativi.

    Returns:
        (matrice proiettata, True se e' stato necessario correggere)
    """
    eigval, eigvec, _ = _symmetric_eig(M)
    if eigval.min() >= 0:
        M = np.atleast_2d(np.asarray(M, dtype=float))
        return (M + M.T) / 2.0, False
    clamped = (eigvec * np.clip(eigval, 0.0, None)) @ eigvec.T
    return (clamped + clamped.T) / 2.0, True


class NelderMeadResult:
    def __init__(self, x, fun, n_iter, warn, n_starts):
        self.x = x
        self.fun = fun
        self.n_iter = n_iter
        self.warn = warn
        self.n_starts = n_starts

    def __iter__(self):
        # consente: argmin, value = nelder_mead(...)
        return iter((self.x, self.fun))


def nelder_mead(f, x0, max_iter=None, tol=None, restarts=None, starts=None, seed=None):
    """
    Simplesso di Nelder-Mead (scipy) con partenze multiple.

    Args:
        f: obiettivo su R^d
        x0: punto di partenza principale
        max_iter: iterazioni massime per corsa
        tol: tolleranza su diametro del simplesso e dispersione di f
        restarts: numero di ripartenze da simplessi perturbati attorno al migliore
        starts: punti di partenza aggiuntivi
        seed: seme per le perturbazioni

    Returns:
        NelderMeadResult (x, fun, n_iter, warn, n_starts)
    """
    max_iter = Config.NM_MAX_ITER if max_iter is None else max_iter
    tol = Config.NM_TOL if tol is None else tol
    restarts = Config.NM_RESTARTS if restarts is None else restarts
    rng = np.random.default_rng(Config.NM_SEED if seed is None else seed)

    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if not np.isfinite(f(x0)):
        raise DomainError(f"Obiettivo non finito nel punto iniziale {x0}")
    options = {"xatol": tol, "fatol": tol, "maxiter": max_iter, "maxfev": 4 * max_iter}

    best = None
    total_iter = 0
    warn = False
    candidates = [x0] + [np.atleast_1d(np.asarray(s, dtype=float)) for s in (starts or [])]

    def run(start, simplex=None):
        nonlocal best, total_iter, warn
        opts = dict(options)
        if simplex is not None:
            opts["initial_simplex"] = simplex
        res = optimize.minimize(f, start, method="Nelder-Mead", options=opts)
        total_iter += int(res.nit)
        if res.status != 0:
            warn = True
            logger.warning("⚠️ Nelder-Mead: iterazioni massime raggiunte (%s)", res.message)
        if best is None or res.fun < best.fun:
            best = res

    for start in candidates:
        if np.isfinite(f(start)):
            run(start)

    d = x0.size
    for _ in range(restarts):
        center = best.x
        simplex = center + Config.NM_JITTER * rng.standard_normal((d + 1, d))
        simplex[0] = center
        run(center, simplex)

    logger.debug("Nelder-Mead: minimo %.6g in %s dopo %d iterazioni", best.fun, best.x, total_iter)
    return NelderMeadResult(np.asarray(best.x, dtype=float), float(best.fun), total_iter, warn,
                            len(candidates) + restarts)


def sample_trunc_w2(mu2, region, rng, size=None):
    """
    Campionamento per rifiuto da N(mu2, I) condizionata alla regione.
    Restituisce un vettore (size=None) o una matrice size x l.
    """
    mu2 = np.atleast_1d(np.asarray(mu2, dtype=float))
    l = mu2.size
    mass = region.mass(mu2)
    if mass < Config.REJECTION_MIN_ACCEPT:
        raise FeasibilityError(f"Probabilita' di accettazione troppo bassa ({mass:.3e}) su {region}")

    wanted = 1 if size is None else int(size)
    accepted = []
    count = 0
    while count < wanted:
        batch = int(math.ceil((wanted - count) / mass * 1.2)) + 16
        draws = mu2 + rng.standard_normal((batch, l))
        keep = draws[region.contains(draws)]
        accepted.append(keep)
        count += keep.shape[0]
    out = np.concatenate(accepted, axis=0)[:wanted]
    return out[0] if size is None else out


class SeedPlan:
    """
    Derivazione di flussi indipendenti da un seme principale: il flusso
    (purpose, index) dipende solo da questi due valori, non dall'ordine di
    esecuzione.
    """

    def __init__(self, master_seed):
        master_seed = int(master_seed)
        if not 0 <= master_seed < 2 ** 64:
            raise DomainError(f"Seme fuori intervallo a 64 bit: {master_seed}")
        self.master_seed = master_seed

    def sequence(self, index, purpose=0):
        return np.random.SeedSequence(entropy=self.master_seed, spawn_key=(int(purpose), int(index)))

    def stream(self, index, purpose=0):
        return np.random.default_rng(self.sequence(index, purpose))

    def child_seed(self, index, purpose=0):
        return int(self.sequence(index, purpose).generate_state(1, dtype=np.uint64)[0])
