"""Shared fixtures-in-plain-python for the test suite."""

import json
import os

import jsonschema

from tailfolio import eeg

SCHEMA_DIR = os.path.join(os.path.dirname(__file__), os.pardir, "docs", "schemas")


def validate_schema(payload: dict, name: str) -> None:
    with open(os.path.join(SCHEMA_DIR, name), encoding="utf-8") as fh:
        schema = json.load(fh)
    jsonschema.validate(payload, schema)


def centered_columns() -> eeg.ColumnParams:
    return eeg.centering_shift(eeg.ColumnParams())


def two_site_net(weight: float = 0.12, delay: int = 1) -> eeg.RegionNet:
    sites = (eeg.ElectrodeSite(name="Fz", offset=1.0, gain_e=1.0,
                               gain_i=0.6, trough_slope=0.5),
             eeg.ElectrodeSite(name="Cz", offset=0.5, gain_e=1.1,
                               gain_i=0.5, trough_slope=0.45))
    return eeg.RegionNet(sites=sites,
                         couplings=(eeg.Coupling("Fz", "Cz", weight, delay),),
                         columns=centered_columns())


def p300_net() -> eeg.RegionNet:
    """Five-electrode chain with 1, 1, 2, 2 epoch delays."""
    mk = eeg.ElectrodeSite
    sites = (mk(name="Fz", offset=1.0, gain_e=1.0, gain_i=0.6, trough_slope=0.5),
             mk(name="Cz", offset=0.5, gain_e=1.1, gain_i=0.5, trough_slope=0.45),
             mk(name="Pz", offset=-0.5, gain_e=0.9, gain_i=0.7, trough_slope=0.55),
             mk(name="P3", offset=0.2, gain_e=1.05, gain_i=0.55, trough_slope=0.5),
             mk(name="P4", offset=-0.2, gain_e=0.95, gain_i=0.65, trough_slope=0.5))
    couplings = (eeg.Coupling("Fz", "Cz", 0.12, 1),
                 eeg.Coupling("Cz", "Pz", 0.10, 1),
                 eeg.Coupling("Pz", "P3", 0.08, 2),
                 eeg.Coupling("Pz", "P4", 0.08, 2))
    return eeg.RegionNet(sites=sites, couplings=couplings,
                         columns=centered_columns())


def p300_free_params(net: eeg.RegionNet):
    """The 24 free keys and bounds used by the simulate-then-fit checks."""
    free = []
    bounds = {}
    for name in net.names:
        free += [f"{name}.offset", f"{name}.gain_e",
                 f"{name}.gain_i", f"{name}.trough_slope"]
        bounds[f"{name}.offset"] = (-3.0, 3.0)
        bounds[f"{name}.gain_e"] = (0.3, 2.0)
        bounds[f"{name}.gain_i"] = (0.1, 1.5)
        bounds[f"{name}.trough_slope"] = (0.1, 1.0)
    for c in net.couplings:
        key = f"{c.source}->{c.target}.weight"
        free.append(key)
        bounds[key] = (0.0, 0.3)
    return free, bounds
