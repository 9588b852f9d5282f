import json
import logging

import numpy as np
import pandas as pd

from utils.tap_errors import DimensionMismatchError, DomainError, MissingWeightError, ParseError

logger = logging.getLogger(__name__)


def _with_intercept(X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return np.column_stack([np.ones(X.shape[0]), X])


class DataSchema:
    """Colonne dei file CSV: covariate, risposta, peso di disegno (solo campione A)."""

    def __init__(self, covariates, outcome, weight, delimiter=","):
        if not covariates:
            raise DomainError("Lo schema deve indicare almeno una covariata")
        self.covariates = list(covariates)
        self.outcome = outcome
        self.weight = weight
        self.delimiter = delimiter

    def to_dict(self):
        return {"covariates": self.covariates, "outcome": self.outcome,
                "weight": self.weight, "delimiter": self.delimiter}

    @classmethod
    def from_dict(cls, data):
        try:
            return cls(covariates=data["covariates"], outcome=data["outcome"],
                       weight=data.get("weight", "weight"), delimiter=data.get("delimiter", ","))
        except KeyError as e:
            raise ParseError(f"Chiave mancante nello schema: {e}")

    @classmethod
    def from_json_file(cls, file_path):
        """Carica lo schema da un file JSON."""
        try:
            with open(file_path, 'r') as f:
                data = json.load(f)
        except FileNotFoundError:
            raise FileNotFoundError(f"File di schema non trovato a: {file_path}")
        except json.JSONDecodeError:
            raise ValueError(f"Errore di sintassi nel file JSON: {file_path}")
        return cls.from_dict(data)


class ProbabilitySample:
    """Campione probabilistico: covariate (intercetta inclusa), risposta, pesi d = 1/pi_A."""

    def __init__(self, X, y, weights):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        y = np.asarray(y, dtype=float).ravel()
        weights = np.asarray(weights, dtype=float).ravel()
        if X.shape[0] == 0:
            raise DomainError("Campione probabilistico vuoto")
        if not (X.shape[0] == y.size == weights.size):
            raise DimensionMismatchError(
                f"Campione A: righe incoerenti (X={X.shape[0]}, y={y.size}, d={weights.size})")
        if not np.all(np.isfinite(weights)) or np.any(weights <= 0):
            raise DomainError("I pesi di disegno devono essere positivi e finiti")
        self.X = X
        self.y = y
        self.d = weights

    @property
    def size(self):
        return self.y.size

    @property
    def p(self):
        return self.X.shape[1]


class NonProbabilitySample:
    """Campione non probabilistico: covariate (intercetta inclusa) e risposta."""

    def __init__(self, X, y):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        y = np.asarray(y, dtype=float).ravel()
        if X.shape[0] == 0:
            raise DomainError("Campione non probabilistico vuoto")
        if X.shape[0] != y.size:
            raise DimensionMismatchError(f"Campione B: righe incoerenti (X={X.shape[0]}, y={y.size})")
        self.X = X
        self.y = y

    @property
    def size(self):
        return self.y.size

    @property
    def p(self):
        return self.X.shape[1]


class CombinedData:
    def __init__(self, prob, nonprob):
        if prob.p != nonprob.p:
            raise DimensionMismatchError(
                f"Dimensione delle covariate diversa: A={prob.p}, B={nonprob.p}")
        self.prob = prob
        self.nonprob = nonprob

    @property
    def n_A(self):
        return self.prob.size

    @property
    def n_B(self):
        return self.nonprob.size

    @property
    def n(self):
        return self.n_A + self.n_B

    @property
    def f_B(self):
        return self.n_B / self.n

    @property
    def p(self):
        return self.prob.p

    @property
    def N_hat(self):
        """Stima di Hajek della numerosita' della popolazione (somma dei pesi di A)."""
        return float(self.prob.d.sum())

    def stacked(self):
        """
        Dati impilati (prima A, poi B) con indicatori di appartenenza.

        Returns:
            (X, y, delta_A, delta_B, d) con d = 0 sulle righe di B
        """
        X = np.vstack([self.prob.X, self.nonprob.X])
        y = np.concatenate([self.prob.y, self.nonprob.y])
        delta_A = np.concatenate([np.ones(self.n_A), np.zeros(self.n_B)])
        delta_B = 1.0 - delta_A
        d = np.concatenate([self.prob.d, np.zeros(self.n_B)])
        return X, y, delta_A, delta_B, d

    def resample(self, rng):
        """Ricampionamento con reinserimento di n_A righe da A e n_B da B; i pesi restano invariati."""
        ia = rng.integers(0, self.n_A, size=self.n_A)
        ib = rng.integers(0, self.n_B, size=self.n_B)
        return CombinedData(
            ProbabilitySample(self.prob.X[ia], self.prob.y[ia], self.prob.d[ia]),
            NonProbabilitySample(self.nonprob.X[ib], self.nonprob.y[ib]),
        )

    @classmethod
    def from_arrays(cls, X_A, y_A, d_A, X_B, y_B, add_intercept=True):
        if add_intercept:
            X_A, X_B = _with_intercept(X_A), _with_intercept(X_B)
        return cls(ProbabilitySample(X_A, y_A, d_A), NonProbabilitySample(X_B, y_B))


class FinitePopulation:
    """Popolazione finita con covariate osservabili, risposta e latente u (mai esposto agli stimatori)."""

    def __init__(self, X, y, latent):
        self.X = np.asarray(X, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self._latent = np.asarray(latent, dtype=float)

    @property
    def N(self):
        return self.y.size

    def observed(self):
        return self.X, self.y

    def latent(self):
        return self._latent

    def mu_g(self, estimand):
        return estimand.population_value(self.X, self.y)


def _read_numeric_csv(path, columns, delimiter, weight=None):
    try:
        frame = pd.read_csv(path, sep=delimiter, dtype=str, keep_default_na=False)
    except FileNotFoundError:
        raise FileNotFoundError(f"File di dati non trovato a: {path}")
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ParseError(f"CSV non leggibile: {e}", path=path)

    if weight is not None and weight not in frame.columns:
        raise MissingWeightError(f"Colonna dei pesi '{weight}' assente in {path}")
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise ParseError(f"Colonne mancanti {missing}", path=path)

    values = np.empty((len(frame), len(columns)))
    for j, col in enumerate(columns):
        parsed = pd.to_numeric(frame[col].str.strip(), errors="coerce").to_numpy(dtype=float)
        bad = np.flatnonzero(~np.isfinite(parsed))
        if bad.size:
            row = int(bad[0])
            # riga del file: intestazione + indice a base 1
            raise ParseError(f"Valore non numerico '{frame[col].iloc[row]}'",
                             path=path, row=row + 2, column=col)
        values[:, j] = parsed
    if values.shape[0] == 0:
        raise ParseError("File senza righe di dati", path=path)
    return values


def load_samples(prob_path, nonprob_path, schema):
    """
    Legge i due campioni da CSV secondo lo schema, antepone l'intercetta e
    verifica la coerenza delle dimensioni.
    """
    cols = schema.covariates + [schema.outcome]
    prob_values = _read_numeric_csv(prob_path, cols + [schema.weight], schema.delimiter,
                                    weight=schema.weight)
    nonprob_values = _read_numeric_csv(nonprob_path, cols, schema.delimiter)

    k = len(schema.covariates)
    weights = prob_values[:, k + 1]
    if np.any(weights <= 0):
        row = int(np.flatnonzero(weights <= 0)[0])
        raise ParseError(f"Peso non positivo {weights[row]}", path=prob_path, row=row + 2,
                         column=schema.weight)

    data = CombinedData.from_arrays(prob_values[:, :k], prob_values[:, k], weights,
                                    nonprob_values[:, :k], nonprob_values[:, k])
    logger.info("✅ Dati caricati: n_A=%d, n_B=%d, p=%d", data.n_A, data.n_B, data.p)
    return data
