"""Model-serving side of the redaction-certificate toolchain.

Turns image classifiers into case bundles (preprocessed tensor, segmentation,
per-label attribution maps, digests) and serves their predictions over a
newline-delimited JSON protocol. The certificate engine consumes bundles and
the endpoint as opaque data; nothing here imports it.
"""

from .config import BridgeConfig

__version__ = "0.1.0"
__all__ = ["BridgeConfig"]
