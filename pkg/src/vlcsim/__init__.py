"""Link-level simulator for indoor optical wireless transmission.

Compares unipolar optical OFDM (ACO-OFDM), its single-carrier
frequency-domain-equalized variant, and NRZ on-off keying with MMSE
equalization over a ray-traced multipath room response with a nonlinear
LED front end.  Experiments cover PAPR statistics, Monte Carlo BER,
bias sensitivity, convolutional coding gain, and power/bandwidth
efficiency summaries.
"""

from .analysis import (
    BerRecord,
    CcdfRecord,
    CodingConfig,
    LinkConfig,
    ccdf_papr,
    link_taps_from_cir,
    normalized_bandwidth,
    normalized_snr_at_ber,
    papr,
    papr_at_ccdf,
    papr_grid_db,
    read_ber_csv,
    read_ccdf_csv,
    run_ber_sweep,
    snr_at_ber,
    write_ber_csv,
    write_ccdf_csv,
)
from .channel import (
    ChannelImpulseResponse,
    RoomConfig,
    cached_impulse_response,
    load_cir,
    propagate,
    resample_cir,
    save_cir,
    simulate_impulse_response,
    total_gain,
)
from .coding import conv_encode, deinterleave, interleave, viterbi_decode_soft
from .config import ConfigError, ExperimentConfig, load_config, reference_text
from .constellation import (
    ConstellationSpec,
    demap_hard,
    demap_soft,
    map_bits,
)
from .led import (
    DatasheetCurve,
    LedModel,
    default_curve,
    default_led,
    fit_polynomial,
    led_apply,
    load_datasheet_curve,
)
from .modem import (
    AcoFrameConfig,
    SignalFrame,
    SingularChannelError,
    aco_ofdm_demodulate,
    aco_ofdm_modulate,
    aco_scfde_demodulate,
    aco_scfde_modulate,
    build_odd_hermitian_vector,
    freq_response_from_cir,
)
from .ook import MmseEqualizer, mmse_design, ook_demodulate, ook_modulate

__version__ = "0.1.0"

__all__ = [
    "AcoFrameConfig",
    "BerRecord",
    "CcdfRecord",
    "ChannelImpulseResponse",
    "CodingConfig",
    "ConfigError",
    "ConstellationSpec",
    "DatasheetCurve",
    "ExperimentConfig",
    "LedModel",
    "LinkConfig",
    "MmseEqualizer",
    "RoomConfig",
    "SignalFrame",
    "SingularChannelError",
    "aco_ofdm_demodulate",
    "aco_ofdm_modulate",
    "aco_scfde_demodulate",
    "aco_scfde_modulate",
    "build_odd_hermitian_vector",
    "cached_impulse_response",
    "ccdf_papr",
    "conv_encode",
    "default_curve",
    "default_led",
    "deinterleave",
    "demap_hard",
    "demap_soft",
    "fit_polynomial",
    "freq_response_from_cir",
    "interleave",
    "led_apply",
    "link_taps_from_cir",
    "load_cir",
    "load_config",
    "load_datasheet_curve",
    "map_bits",
    "mmse_design",
    "normalized_bandwidth",
    "normalized_snr_at_ber",
    "ook_demodulate",
    "ook_modulate",
    "papr",
    "papr_at_ccdf",
    "papr_grid_db",
    "propagate",
    "read_ber_csv",
    "read_ccdf_csv",
    "reference_text",
    "resample_cir",
    "run_ber_sweep",
    "save_cir",
    "simulate_impulse_response",
    "snr_at_ber",
    "total_gain",
    "viterbi_decode_soft",
    "write_ber_csv",
    "write_ccdf_csv",
]
