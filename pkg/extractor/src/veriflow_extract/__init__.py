"""Feature-view extraction adapter for the claim-veracity toolkit.

Produces the toolkit's manifest+CSV feature-view files from raw inputs:
claim text (768-d embedding view), WAV clips (6373-d acoustic functional
view), and externally computed i-vector tables (600-d view).
"""

__version__ = "0.1.0"

from .acoustic import ACOUSTIC_DIM, acoustic_functionals, clip_features  # noqa: F401
from .encoders import EMBED_DIM, embed_claims  # noqa: F401
from .ivectors import IVECTOR_DIM, ivector_convert  # noqa: F401
from .viewio import ExtractError  # noqa: F401
