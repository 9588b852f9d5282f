"""
Riga di comando del sistema test-and-pool.

Comandi: estimate, simulate, toy-surface, ci. Codici di uscita: 0 successo,
1 errore di uno stadio (messaggio su stderr), 2 errore d'uso.
"""
import argparse
import logging
import os
import sys

sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from conf.SystemConfiguration import SystemConfig as Config
from model.adaptive_ci_logic import AdaptiveCiLogic
from model.run_descriptor import RunDescriptor
from model.sim_config import SCALE_DESK, SCALE_FULL
from model.survey_data import DataSchema, load_samples
from model.tap_estimate import TapEstimate
from model.tap_logic import TapLogic
from process.study_runner import StudyRunner, run_study
from process.toy_surface_producer import ToyGrid, toy_surface
from utils.senml_helper import SenMLHelper
from utils.tap_errors import ConfigError, TapError

logger = logging.getLogger("tap_cli")

CI_CHOICES = ("wald", "baci-f", "baci", "paci")


def _csv_list(text):
    return [item.strip() for item in text.split(",") if item.strip()]


def _float_list(text):
    try:
        return [float(item) for item in _csv_list(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"Lista di numeri non valida: {text}")


def _ci_list(text):
    methods = _csv_list(text)
    unknown = [m for m in methods if m not in CI_CHOICES]
    if unknown:
        raise argparse.ArgumentTypeError(f"Intervalli sconosciuti {unknown} (ammessi: {', '.join(CI_CHOICES)})")
    return methods


def build_parser():
    parser = argparse.ArgumentParser(prog="tap", description="Integrazione di campioni con test-and-pool")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Manifesto JSON dell'esecuzione")
    common.add_argument("--seed", type=int, help="Seme principale")
    common.add_argument("--threads", type=int, help="Numero di thread per le replicazioni")
    common.add_argument("--out", help="File o cartella di output")
    common.add_argument("--verbose", action="store_true", help="Log di livello DEBUG")
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", parents=[common], help="Stima test-and-pool su due file CSV")
    est.add_argument("--prob", help="CSV del campione probabilistico (con pesi)")
    est.add_argument("--nonprob", help="CSV del campione non probabilistico")
    est.add_argument("--schema", help="Schema JSON delle colonne")
    est.add_argument("--strategy", choices=Config.NUISANCE_STRATEGIES)
    est.add_argument("--variance", choices=(Config.VARIANCE_BOOTSTRAP, Config.VARIANCE_PLUGIN))
    est.add_argument("--force-lambda", type=float)
    est.add_argument("--ci", type=_ci_list, help="Intervalli separati da virgola")

    sim = sub.add_parser("simulate", parents=[common], help="Studio Monte Carlo")
    sim.add_argument("--scenario", type=float, help="Intensita' b della violazione")
    sim.add_argument("--replicates", type=int)
    sim.add_argument("--scale", choices=(SCALE_DESK, SCALE_FULL))

    toy = sub.add_parser("toy-surface", parents=[common], help="Superficie MSE dell'esempio giocattolo")
    toy.add_argument("--lambda-max", type=float)
    toy.add_argument("--c-max", type=float)
    toy.add_argument("--points", type=int)
    toy.add_argument("--etas", type=_float_list)

    ci = sub.add_parser("ci", parents=[common], help="Ricalcola gli intervalli su una stima salvata")
    ci.add_argument("--report", required=True, help="Report SenML prodotto da 'estimate'")
    ci.add_argument("--ci", type=_ci_list)
    return parser


def _descriptor(args):
    descriptor = RunDescriptor.from_json_file(args.config) if args.config else RunDescriptor()
    return descriptor.with_overrides(**{"run.seed": args.seed, "run.threads": args.threads, "run.out": args.out})


def _load_data(prob, nonprob, schema_path):
    if not (prob and nonprob and schema_path):
        raise ConfigError("Servono i file del campione A, del campione B e lo schema")
    return load_samples(prob, nonprob, DataSchema.from_json_file(schema_path))


def format_estimate(tap, intervals):
    lines = [f"Stimando: {tap.estimand!r}, strategia {tap.strategy}",
             f"mu_A = {tap.mu_A.tolist()}",
             f"mu_B = {tap.mu_B.tolist()}",
             f"T = {tap.T:.6g}, {tap.tuning}",
             f"Decisione: {'pooling' if tap.pooled else 'solo campione A'}",
             f"mu_tap = {tap.point.tolist()}"]
    for key, interval in intervals.items():
        lines.append(f"{key}: [{interval.lower:.6g}, {interval.upper:.6g}] livello {interval.level:.2f}")
    return "\n".join(lines)


def _write_report(report, out):
    if out:
        with open(out, "w") as f:
            f.write(report)
        logger.info("✅ Report salvato in %s", out)


def cmd_estimate(args):
    descriptor = _descriptor(args).with_overrides(**{
        "data.prob": args.prob, "data.nonprob": args.nonprob, "data.schema": args.schema,
        "nuisance.strategy": args.strategy, "estimators.variance": args.variance,
        "tap.force_lambda": args.force_lambda, "ci.methods": args.ci})
    paths = descriptor["data"]
    data = _load_data(paths["prob"], paths["nonprob"], paths["schema"])
    estimand = descriptor.to_estimand()
    strategy = descriptor["nuisance"]["strategy"]
    tap = TapLogic.estimate_tap(data, estimand, strategy, descriptor.to_tap_options())
    intervals = AdaptiveCiLogic.interval_battery(data, estimand, tap, descriptor.to_baci_config(),
                                                 descriptor["ci"]["methods"])
    run = {"prob": paths["prob"], "nonprob": paths["nonprob"], "schema": paths["schema"], "seed": descriptor.seed}
    _write_report(SenMLHelper.create_tap_report(tap, intervals, run), descriptor["run"]["out"])
    print(format_estimate(tap, intervals))
    return 0


def cmd_ci(args):
    with open(args.report, "r") as f:
        report = f.read()
    tap = TapEstimate.from_report(report)
    values = SenMLHelper.values(SenMLHelper.parse_senml(report))
    descriptor = _descriptor(args).with_overrides(**{"ci.methods": args.ci})
    if args.seed is None and "run/seed" in values:
        descriptor = descriptor.with_overrides(**{"run.seed": int(values["run/seed"])})
    data = _load_data(values.get("run/prob"), values.get("run/nonprob"), values.get("run/schema"))
    intervals = AdaptiveCiLogic.interval_battery(data, tap.estimand, tap, descriptor.to_baci_config(),
                                                 descriptor["ci"]["methods"])
    run = {k[len("run/"):]: v for k, v in values.items() if k.startswith("run/")}
    run["seed"] = descriptor.seed
    _write_report(SenMLHelper.create_tap_report(tap, intervals, run), descriptor["run"]["out"])
    print(format_estimate(tap, intervals))
    return 0


def cmd_simulate(args, parser):
    if args.replicates is not None and args.replicates <= 0:
        parser.error("--replicates deve essere positivo")
    descriptor = _descriptor(args).with_overrides(**{
        "sim.b": args.scenario, "sim.replicates": args.replicates, "sim.scale": args.scale})
    summary = run_study(descriptor.to_sim_config())
    if descriptor["run"]["out"]:
        StudyRunner.write_outputs(summary, descriptor["run"]["out"])
    print(summary.to_text())
    return 0


def cmd_toy_surface(args):
    descriptor = _descriptor(args).with_overrides(**{
        "toy.lambda_max": args.lambda_max, "toy.c_max": args.c_max, "toy.points": args.points,
        "toy.etas": args.etas})
    toy = descriptor["toy"]
    table = toy_surface(ToyGrid(toy["lambda_max"], toy["c_max"], toy["points"], toy["etas"]))
    out = descriptor["run"]["out"]
    if out:
        table.to_csv(out, index=False)
        logger.info("✅ Superficie salvata in %s", out)
    else:
        table.to_csv(sys.stdout, index=False)
    return 0


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "estimate":
            return cmd_estimate(args)
        if args.command == "simulate":
            return cmd_simulate(args, parser)
        if args.command == "toy-surface":
            return cmd_toy_surface(args)
        return cmd_ci(args)
    except (TapError, OSError, ValueError) as e:
        print(f"❌ {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
