"""Error-correction codes for additive-noise and transposition channels."""

from .codebook import (
    Codebook,
    MinEnergyResult,
    all_words,
    as_bits,
    bits_to_int,
    bits_to_str,
    int_to_bits,
    min_distance,
    min_energy_codebook,
    min_energy_search,
)
from .linear import (
    hamming_codebook,
    hamming_decode,
    hamming_detect,
    hamming_encode,
    rm84_codebook,
    rm84_decode,
    rm84_encode,
)
from .transposition import (
    REFERENCE_MOCO_CODEBOOK,
    AdjacentSwapModel,
    BitFlipModel,
    DriftTranspositionModel,
    moco_decode,
    moco_distance,
    moco_objective,
    moco_search,
    transposition_channel,
)
from .weight import (
    TABLE_421,
    IsiFreeTable,
    dhw_codebook,
    dhw_decode,
    dhw_encode,
    dhw_max_rate,
    isifree_decode,
    isifree_encode,
    isifree_table,
)
