# Copyright 2026 The mtsplit Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Multi-task split learning with task and input privacy.

Thin Python layer over the native core. Config documents and reports are
plain dicts.
"""

import json as _json

from . import _core
from ._core import (
    BudgetExhaustedError,
    CalibrationError,
    ConfigError,
    CorruptionError,
    IncompleteError,
    MtsplitError,
    ProtocolError,
    SessionError,
    calibrate_sigma,
    clip_per_sample,
    compute_epsilon,
    decode_message,
    encode_message,
    exit_code_for,
    generate_classification_pair,
    noisy_aggregate,
    similarity,
)

MSG_HELLO = 1
MSG_FORWARD_FEATURES = 2
MSG_BACKWARD_GRADS = 3
MSG_LABELS_ENC = 4
MSG_METRICS = 5
MSG_CONTROL = 6
MSG_BYE = 7


def normalize_config(config):
    """Parses a config dict and returns it with every default filled in."""
    return _json.loads(_core.normalize_config(_json.dumps(config)))


def train(config):
    """Runs the configured regime and returns the report dict."""
    return _json.loads(_core.train(_json.dumps(config)))


def eval_interchange(checkpoint, out_dir):
    """Scores every metamorph against every head of a checkpoint."""
    return _json.loads(_core.eval_interchange(str(checkpoint), str(out_dir)))


__all__ = [name for name in dir() if not name.startswith("_")]
