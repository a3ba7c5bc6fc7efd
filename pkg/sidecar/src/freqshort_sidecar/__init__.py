"""Model-serving sidecar for the frequency-shortcut toolkit.

Wraps pre-trained classifiers behind the binary inference protocol and
generates sign-gradient adversarial image trees offline. All spectral work
stays on the client side; this package only ever sees ready-to-score pixel
tensors and applies its own normalization recipe.
"""

from .fgsm import generate_fgsm
from .models import LinearNpzModel, ModelSpecError, TorchscriptModel, load_model_spec
from .protocol import serve_stream
from .server import serve_stdio, serve_tcp

__version__ = "0.1.0"
