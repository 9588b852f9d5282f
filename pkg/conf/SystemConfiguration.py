class SystemConfig(object):
    # ---------------------------------------------------------------------
    # Tolleranze numeriche (kernel)
    # ---------------------------------------------------------------------
    SERIES_REL_TOL = 1e-14  # Contributo relativo minimo di un termine della serie
    SERIES_TAIL_TOL = 1e-14  # Limite sulla coda di Poisson
    SERIES_MAX_TERMS = 100000
    SERIES_CHUNK = 64  # Termini valutati per blocco

    QUANTILE_TOL = 1e-12
    PSD_EIG_TOL = 1e-10  # Autovalori sotto -tol*||M|| => matrice indefinita
    TRUNC_MASS_MIN = 1e-12  # Massa minima della regione troncata
    REJECTION_MIN_ACCEPT = 1e-6  # Probabilita' di accettazione minima del campionatore

    # ---------------------------------------------------------------------
    # Nelder-Mead
    # ---------------------------------------------------------------------
    NM_TOL = 1e-8
    NM_RESTARTS = 5
    NM_MAX_ITER = 2000
    NM_JITTER = 0.25  # Ampiezza del disturbo sui simplessi di ripartenza
    NM_SEED = 20240517

    # ---------------------------------------------------------------------
    # Modelli di disturbo (Newton)
    # ---------------------------------------------------------------------
    NEWTON_MAX_ITER = 100
    NEWTON_MAX_HALVINGS = 30
    ALPHA_DIVERGENCE_NORM = 1e3
    RESIDUAL_TOL_PER_UNIT = 1e-8  # Residuo massimo ammesso: tol * n
    GRAM_COND_MAX = 1e12
    PROPENSITY_FLOOR = 1e-8

    STRATEGY_PSEUDO_ML_OLS_B = "pseudo-ml-ols-b"
    STRATEGY_PSEUDO_ML_OLS_AB = "pseudo-ml-ols-ab"
    STRATEGY_KH = "kh"
    NUISANCE_STRATEGIES = (STRATEGY_PSEUDO_ML_OLS_B, STRATEGY_PSEUDO_ML_OLS_AB, STRATEGY_KH)
    DEFAULT_STRATEGY = STRATEGY_PSEUDO_ML_OLS_AB

    # ---------------------------------------------------------------------
    # Bootstrap per le componenti di varianza
    # ---------------------------------------------------------------------
    BOOTSTRAP_K_FULL = 2000
    BOOTSTRAP_K_DESK = 500
    BOOTSTRAP_K_MIN = 50
    REPLICATE_FAILURE_MAX = 0.02  # Frazione massima di replicazioni scartate

    VARIANCE_BOOTSTRAP = "bootstrap"
    VARIANCE_PLUGIN = "plugin"

    # ---------------------------------------------------------------------
    # Tuning test-and-pool
    # ---------------------------------------------------------------------
    LAMBDA_MAX = 50.0  # Bordo superiore del box di ottimizzazione
    C_GAMMA_MAX = 200.0
    BOX_EDGE_REL = 1e-3  # Distanza relativa dal bordo per "effettivamente illimitato"
    TUNE_COARSE_GRID = 25  # Griglia grossolana per i punti di partenza
    PRETEST_LEVEL = 0.95  # Quantile chi-quadro della soglia fissa

    # ---------------------------------------------------------------------
    # Intervalli adattivi
    # ---------------------------------------------------------------------
    CI_ALPHA = 0.05
    CI_EPSILON = 0.05
    KAPPA_GRID = (2.0, 4.0, 10.0, 20.0, 30.0)
    BACI_B_FULL = 2000
    BACI_B_DESK = 500
    BACI_B_MIN = 200
    DOUBLE_B1 = 100  # Dataset bootstrap di primo ordine
    DOUBLE_B2 = 100  # Dataset di secondo ordine per ciascuno
    DOUBLE_B2_MIN = 50
    DOUBLE_BUDGET_MAX = 250000  # Tetto su B1 * B2
    MU2_GRID_HALF_WIDTH = 6.0
    MU2_GRID_STEP = 0.25
    MU2_MAX_DIM = 3
    PACI_DRAWS = 2000
    PACI_GRID_POINTS = 41

    VN_FIXED = "fixed-loglog"
    VN_DOUBLE = "double-bootstrap"

    # ---------------------------------------------------------------------
    # Laboratorio di simulazione
    # ---------------------------------------------------------------------
    SIM_N_FULL = 100000
    SIM_N_DESK = 20000
    SIM_TARGET_NA = 600
    SIM_TARGET_NB = 5000
    SIM_B_VALUES = (0.0, 10.0, 100.0)
    SIM_R_FULL = 2000
    SIM_R_DESK = 500
    SIM_COEF_A = (0.2, 0.1)  # Coefficienti di X1, X2 nel logit di pi_A
    SIM_COEF_B = (0.1, 0.2)  # Coefficienti di X1, X2 nel logit di pi_B
    SIM_CONFOUNDER_SCALE = 0.5  # Peso del termine b*u/sqrt(n_B)
    SIM_X2_MEAN = 1.0
    SIM_NU_BRACKET = 40.0  # Intervallo di ricerca per le intercette di calibrazione
    SIM_DISPLAY_SCALE = 1e3  # Convenzione x10^-3 nelle tabelle

    # ---------------------------------------------------------------------
    # Esempio giocattolo (superfici di MSE)
    # ---------------------------------------------------------------------
    TOY_V_A = 2.0
    TOY_V_B = 1.0
    TOY_GAMMA = 0.5
    TOY_F_B = 1.0
    TOY_JAC = -1.0
    TOY_ETAS = (0.0, 0.5, 1.5)
    TOY_LAMBDA_MAX = 10.0
    TOY_C_MAX = 50.0
    TOY_GRID_POINTS = 51

    # ---------------------------------------------------------------------
    # Flussi casuali (spawn key di SeedSequence)
    # ---------------------------------------------------------------------
    STREAM_VARIANCE = 1
    STREAM_BACI = 2
    STREAM_DOUBLE = 3
    STREAM_PACI = 4
    STREAM_SIM = 5
    STREAM_REPLICATE = 6

    # ---------------------------------------------------------------------
    # Report
    # ---------------------------------------------------------------------
    REPORT_BASE_NAME = "urn:tap:"
    REPORT_BASE_TIME = 0
