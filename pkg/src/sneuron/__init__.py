"""Style-specific neuron identification and neuron-steered contrastive
decoding on toy decoder-only transformers."""
from .atlas import NeuronAtlas, atlas_stats, build_atlas, select_topk, summarize_activations
from .corpus import Vocabulary, preprocess, tokenize
from .decoding import DecodeConfig, contrast, generate, plausible_set, select_premature
from .divergence import jsd
from .factory import PlantSpec, load_model, save_model, synth_planted, synth_random
from .model import DeactivationMask, ModelConfig, ModelWeights, forward, logprob_sequence
from .steering import DeactivationPolicy, build_mask, mask_for

__version__ = "0.1.0"
