"""Program autoencoder, soft-prompt mapper and constrained decoding."""

from .decode import decode, token_distribution
from .models import Bottleneck, Decoder, Encoder, Mapper, masked_token_nll
from .train import (
    AutoencoderConfig,
    AutoencoderResult,
    MapperConfig,
    greedy_reconstruction,
    mapper_nll,
    pretrain_autoencoder,
    train_mapper,
)

__all__ = [
    "decode", "token_distribution", "Bottleneck", "Decoder", "Encoder", "Mapper", "masked_token_nll",
    "AutoencoderConfig", "AutoencoderResult", "MapperConfig", "greedy_reconstruction", "mapper_nll",
    "pretrain_autoencoder", "train_mapper",
]
