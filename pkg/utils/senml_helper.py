import json
import numbers
from typing import Any, Dict, List

import numpy as np

from conf.SystemConfiguration import SystemConfig as Config
from utils.tap_errors import ParseError


class SenMLHelper:
    """
    Classe helper per creare e rileggere i report in formato SenML (RFC 8428).

    Ogni report e' una lista di record: il primo porta il nome base ("bn") e
    il tempo base ("bt", fisso a 0 per output riproducibili), i successivi una
    grandezza ciascuno con "v" (numero), "vs" (stringa) o "vb" (booleano).
    Vettori e matrici sono appiattiti con indici separati da '/': V_A/0/1.
    """

    @staticmethod
    def _value_record(name: str, value: Any) -> Dict[str, Any]:
        if isinstance(value, (bool, np.bool_)):
            return {"n": name, "vb": bool(value)}
        if isinstance(value, str):
            return {"n": name, "vs": value}
        if isinstance(value, numbers.Integral):
            # interi esatti anche oltre 2^53 (semi a 64 bit)
            return {"n": name, "v": int(value)}
        return {"n": name, "v": float(value)}

    @staticmethod
    def flatten(name: str, value: Any) -> List[Dict[str, Any]]:
        """Record per uno scalare, un vettore (nome/i) o una matrice (nome/i/j)."""
        if value is None:
            return []
        if isinstance(value, (bool, str, np.bool_, int, float, np.integer, np.floating)):
            return [SenMLHelper._value_record(name, value)]
        arr = np.asarray(value, dtype=float)
        return [SenMLHelper._value_record("/".join([name] + [str(i) for i in idx]), arr[idx])
                for idx in np.ndindex(arr.shape)]

    @staticmethod
    def create_pack(kind: str, entries: Dict[str, Any]) -> str:
        """Pack SenML con nome base urn:tap:<kind>: e le grandezze nell'ordine dato."""
        records = [{"bn": f"{Config.REPORT_BASE_NAME}{kind}:", "bt": Config.REPORT_BASE_TIME}]
        for name, value in entries.items():
            records.extend(SenMLHelper.flatten(name, value))
        return json.dumps(records)

    @staticmethod
    def interval_entries(intervals) -> Dict[str, Any]:
        entries = {}
        for key, interval in intervals.items():
            entries[f"ci/{key}/method"] = interval.method
            entries[f"ci/{key}/lower"] = interval.lower
            entries[f"ci/{key}/upper"] = interval.upper
            entries[f"ci/{key}/level"] = interval.level
            for diag, value in sorted(interval.diagnostics.items()):
                if value is not None:
                    entries[f"ci/{key}/diag/{diag}"] = value
        return entries

    @staticmethod
    def create_tap_report(tap, intervals=None, run=None) -> str:
        """
        Report completo di una stima test-and-pool: tutto cio' che serve per
        ricalcolare gli intervalli senza rifare la stima (comando 'ci').

        Args:
            tap: TapEstimate
            intervals: dizionario nome -> Interval (opzionale)
            run: metadati dell'esecuzione (percorsi dei dati, seme, ...)
        """
        vc = tap.varcomps
        entries = {
            "strategy": tap.strategy,
            "estimand": tap.estimand.kind,
            "cutoff": tap.estimand.cutoff,
            "point": tap.point,
            "mu_A": tap.mu_A,
            "mu_B": tap.mu_B,
            "T": tap.T,
            "pooled": tap.pooled,
            "Lambda": tap.tuning.Lambda,
            "c_gamma": tap.tuning.c_gamma,
            "unbounded_lambda": tap.tuning.unbounded_lambda,
            "unbounded_c": tap.tuning.unbounded_c,
            "tuning_warn": tap.tuning.warn,
            "eta_hat": tap.eta_hat,
            "V_A": vc.V_A,
            "V_B": vc.V_B,
            "Gamma": vc.Gamma,
            "jac_A": vc.jac_A,
            "jac_B": vc.jac_B,
            "f_B": vc.f_B,
            "n": vc.n,
            "clamped": vc.clamped,
            "dropped": vc.dropped,
        }
        if tap.fit is not None:
            entries.update({"fit/alpha": tap.fit.alpha, "fit/beta": tap.fit.beta,
                            "fit/converged": tap.fit.converged, "fit/iterations": tap.fit.iterations,
                            "fit/family": tap.fit.family})
        for key, value in (run or {}).items():
            entries[f"run/{key}"] = value
        entries.update(SenMLHelper.interval_entries(intervals or {}))
        return SenMLHelper.create_pack("estimate", entries)

    @staticmethod
    def parse_senml(senml_json: str) -> Dict[str, Any]:
        """
        Parse un pack SenML e restituisce i dati in formato dizionario

        Returns:
            {"base_name", "base_time", "measurements": {nome: {"value", "type"}}}
        """
        try:
            senml_data = json.loads(senml_json)
        except json.JSONDecodeError as e:
            raise ParseError(f"Report SenML non valido: {e}")
        if not isinstance(senml_data, list) or len(senml_data) == 0:
            raise ParseError("Report SenML non valido: attesa una lista di record non vuota")

        base_record = senml_data[0]
        if not isinstance(base_record, dict) or "bn" not in base_record:
            raise ParseError("Report SenML non valido: manca il record base")
        parsed_data = {
            "base_name": base_record["bn"],
            "base_time": base_record.get("bt", Config.REPORT_BASE_TIME),
            "measurements": {},
        }
        for position, record in enumerate(senml_data[1:], start=1):
            if not isinstance(record, dict) or "n" not in record:
                raise ParseError(f"Record SenML {position} senza nome")
            if "v" in record:
                entry = {"value": record["v"], "type": "number"}
            elif "vs" in record:
                entry = {"value": record["vs"], "type": "string"}
            elif "vb" in record:
                entry = {"value": record["vb"], "type": "boolean"}
            else:
                raise ParseError(f"Record SenML '{record['n']}' senza valore")
            parsed_data["measurements"][record["n"]] = entry
        return parsed_data

    @staticmethod
    def validate_senml(senml_json: str) -> bool:
        try:
            SenMLHelper.parse_senml(senml_json)
            return True
        except ParseError:
            return False

    @staticmethod
    def values(parsed: Dict[str, Any]) -> Dict[str, Any]:
        return {name: m["value"] for name, m in parsed["measurements"].items()}

    @staticmethod
    def collect(values: Dict[str, Any], name: str):
        """Ricostruisce uno scalare, un vettore o una matrice appiattiti da flatten()."""
        if name in values:
            return values[name]
        prefix = name + "/"
        cells = {}
        for key, value in values.items():
            if key.startswith(prefix):
                rest = key[len(prefix):].split("/")
                if all(part.isdigit() for part in rest):
                    cells[tuple(int(part) for part in rest)] = value
        if not cells:
            raise ParseError(f"Grandezza '{name}' assente nel report")
        shape = tuple(max(idx[k] for idx in cells) + 1 for k in range(len(next(iter(cells)))))
        out = np.zeros(shape)
        for idx, value in cells.items():
            out[idx] = value
        return out
