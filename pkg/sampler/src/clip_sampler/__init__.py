"""Score image-caption pairs with attention-mask sampling over CLIP."""

__version__ = "0.1.0"

from .config import MASKABLE_POS, SamplerConfig
from .encoders import StubEncoder, clipscore, load_encoder, masked_subword_positions
from .sampling import Pair, base_only_record, sample_scores, score_pairs
from .writer import record_line, write_records
