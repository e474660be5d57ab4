"""Python front end of the elhom library."""

import json

from . import _elhom
from ._elhom import ElhomError, fit_rate, harmonic_mean

__all__ = ["ElhomError", "cell", "fit_rate", "harmonic_mean", "laminate_oracle", "rates",
           "validate_config", "verify", "tensor_entry"]


def cell(coefficient="laminate", params=None, n=64):
    """Correctors, homogenized tensor and cell identity residuals."""
    return json.loads(_elhom.cell_json(coefficient, json.dumps(params or {}), n))


def rates(config_text, out_dir=""):
    """Run an epsilon sweep from config text; returns the JSON summary."""
    return json.loads(_elhom.rates_json(config_text, out_dir))


def laminate_oracle(params=None):
    return json.loads(_elhom.laminate_oracle_json(json.dumps(params or {})))


def verify(seed=0):
    return json.loads(_elhom.verify_json(seed))


def validate_config(config_text):
    return json.loads(_elhom.validate_config(config_text))


def tensor_entry(tensor, i, j, alpha, beta):
    """Entry of a tensor document, 1-based indices."""
    for e in tensor["entries"]:
        if (e["i"], e["j"], e["alpha"], e["beta"]) == (i, j, alpha, beta):
            return e["value"]
    raise KeyError((i, j, alpha, beta))
