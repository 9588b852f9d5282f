"""
Gerarchia delle eccezioni del sistema test-and-pool.

Gli errori di contratto (input, configurazione) derivano anche da ValueError,
quelli numerici da RuntimeError, cosi' il chiamante puo' intercettarli con le
eccezioni standard oppure con TapError.
"""


class TapError(Exception):
    """Radice di tutti gli errori del pacchetto."""


# ----- Errori di contratto -----

class DomainError(TapError, ValueError):
    pass


class ParseError(TapError, ValueError):
    def __init__(self, message, path=None, row=None, column=None):
        self.path = path
        self.row = row
        self.column = column
        location = []
        if path is not None:
            location.append(f"file={path}")
        if row is not None:
            location.append(f"riga={row}")
        if column is not None:
            location.append(f"colonna={column}")
        suffix = f" ({', '.join(location)})" if location else ""
        super().__init__(f"{message}{suffix}")


class MissingWeightError(TapError, ValueError):
    pass


class DimensionMismatchError(TapError, ValueError):
    pass


class ConfigError(TapError, ValueError):
    pass


class UnsupportedEstimandError(TapError, ValueError):
    pass


class UnsupportedDimensionError(TapError, ValueError):
    pass


class InfeasibleTargetError(TapError, ValueError):
    pass


class EmptyStudyError(TapError, ValueError):
    pass


class BudgetError(TapError, ValueError):
    pass


# ----- Errori numerici -----

class ConvergenceError(TapError, RuntimeError):
    pass


class DivergenceError(TapError, RuntimeError):
    pass


class SingularityError(TapError, RuntimeError):
    pass


class IndefiniteMatrixError(TapError, RuntimeError):
    pass


class DegenerateRegionError(TapError, RuntimeError):
    pass


class FeasibilityError(TapError, RuntimeError):
    pass


class CollinearityError(TapError, RuntimeError):
    pass


class RankDeficiencyError(TapError, RuntimeError):
    pass


class PropensityUnderflowError(TapError, RuntimeError):
    pass


class CauchySchwarzError(TapError, RuntimeError):
    pass


class ReplicateFailureError(TapError, RuntimeError):
    def __init__(self, failed, total, limit):
        self.failed = failed
        self.total = total
        super().__init__(
            f"Replicazioni fallite {failed}/{total} oltre la soglia consentita ({limit:.0%})"
        )


class StageError(TapError, RuntimeError):
    """Fallimento di uno stadio della pipeline; `stage` ne riporta il nome."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"Stadio '{stage}' fallito: {cause}")
