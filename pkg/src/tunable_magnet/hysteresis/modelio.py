"""
Model files: a JSON document with ``format_version`` and either an ``analytic`` or a ``table`` block.
Raw parameters (density scale, chi_rev) are stored so that a reloaded model evaluates bit-identically.
"""

from __future__ import annotations
import json
from pathlib import Path
from typing import Any
import numpy as np

from .._io import dumps_json, loads_json, write_text
from ..errors import ValidationError
from .everett import EverettTable, GaussianPreisach, HysteresisModel

FORMAT_VERSION = 1


def model_to_dict(model: HysteresisModel) -> dict[str, Any]:
    s = model.surface
    if isinstance(s, GaussianPreisach):
        return {
            "format_version": FORMAT_VERSION,
            "analytic": {
                "h_sat": s.h_sat,
                "h_c": s.h_c,
                "sigma_c": s.sigma_c,
                "sigma_u": s.sigma_u,
                "scale": s.scale,
                "chi_rev": model.chi_rev,
                "h_clip": model.h_clip,
                "b_r_max": model.b_r_max,
                "b_sat": model.b_sat,
            },
        }
    return {
        "format_version": FORMAT_VERSION,
        "table": {
            "h_sat": s.h_sat,
            "grid_n": s.grid_n,
            "chi_rev": model.chi_rev,
            "h_clip": model.h_clip,
            "values": [float(v) for v in s.values.ravel()],
        },
    }


def model_from_dict(doc: dict[str, Any]) -> HysteresisModel:
    if doc.get("format_version") != FORMAT_VERSION:
        raise ValidationError(f"unsupported model format_version {doc.get('format_version')!r}")
    blocks = [k for k in ("analytic", "table") if k in doc]
    if len(blocks) != 1:
        raise ValidationError("model document needs exactly one of the 'analytic' or 'table' blocks")
    try:
        if "analytic" in doc:
            a = doc["analytic"]
            surface = GaussianPreisach(
                h_sat=float(a["h_sat"]),
                h_c=float(a["h_c"]),
                sigma_c=float(a["sigma_c"]),
                sigma_u=float(a["sigma_u"]),
                scale=float(a["scale"]),
            )
            return HysteresisModel(surface=surface, chi_rev=float(a["chi_rev"]), h_clip=float(a["h_clip"]))
        t = doc["table"]
        n = int(t["grid_n"])
        values = np.asarray(t["values"], dtype=np.float64)
        if values.size != n * n:
            raise ValidationError(f"table has {values.size} values, expected grid_n^2 = {n * n}")
        table = EverettTable(h_sat=float(t["h_sat"]), values=values.reshape(n, n))
        return HysteresisModel(surface=table, chi_rev=float(t["chi_rev"]), h_clip=float(t["h_clip"]))
    except (KeyError, TypeError) as ex:
        raise ValidationError(f"malformed model document: {ex!r}") from ex


def save_model(model: HysteresisModel, path: Path, config: Any = None) -> None:
    write_text(path, dumps_json(model_to_dict(model), config if config is not None else {}))


def load_model(path: Path) -> HysteresisModel:
    try:
        doc = loads_json(path.read_text())
    except json.JSONDecodeError as ex:
        raise ValidationError(f"{path}: not a JSON model file: {ex}") from ex
    return model_from_dict(doc)
