# Copyright 2026 The jepamon Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Python interface to the jepamon C++ core."""

import json

from ._core import (
    ConfigError,
    Detector,
    JepamonError,
    auroc,
    build_eval_set,
    confusion_metrics,
    operating_points,
    roc_curve,
    simulate,
)
from ._core import default_config as _default_config
from ._core import reproduce as _reproduce

__all__ = [
    "ConfigError",
    "Detector",
    "JepamonError",
    "auroc",
    "build_eval_set",
    "confusion_metrics",
    "default_config",
    "operating_points",
    "reproduce",
    "roc_curve",
    "simulate",
]


def default_config():
    """Effective default pipeline configuration as a dict."""
    return json.loads(_default_config())


def reproduce(config, run_dir):
    """Run simulate, inject, train, detect and evaluate. `config` is a dict
    holding any subset of the default keys."""
    return json.loads(_reproduce(json.dumps(config), str(run_dir)))
