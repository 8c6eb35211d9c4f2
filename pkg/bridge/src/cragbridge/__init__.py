"""HTTP inference bridge for the opencrag backend protocol.

Serves POST /score and POST /generate (plus GET /healthz) so the
orchestration engine can run against real models without doing any
inference in-process. Ships with deterministic lexical stub models for
offline use and tests; real checkpoints load behind `--models real`.
"""

from .config import BridgeConfig
from .models import LexicalEvaluator, TemplateGenerator
from .server import create_app

__all__ = ["BridgeConfig", "LexicalEvaluator", "TemplateGenerator", "create_app"]

__version__ = "0.1.0"
