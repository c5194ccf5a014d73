from ._uivi import *  # noqa: F401,F403
from ._uivi import UiviError

import json as _json


def run(config):
    """Runs an experiment from a dict (or JSON string) config."""
    from . import _uivi

    text = config if isinstance(config, str) else _json.dumps(config)
    out = _uivi.run(text)
    out["records"] = [_json.loads(r) for r in out["records"]]
    return out


__all__ = [name for name in dir() if not name.startswith("_")]
