"""Chromatic-dispersion equalization with sub-band complex all-pass filters."""

from .allpass import (AllpassCascade, AllpassSection, cascade_group_delay,
                      cascade_response, filter_stream, section_group_delay,
                      section_response)
from .channel import (ChannelParams, apply_cd, cd_response, compute_alpha,
                      subband_cd_response)
from .design import (BandDesign, EqualizerDesign, FrequencyGrid, SubbandSpec,
                     WeightingSpec, design_all_bands, design_band,
                     desired_group_delay, desired_phase, fullband_spec,
                     load_design, save_design, subband_spec)
from .filterbank import (FilterBankConfig, PrototypeFilter, analysis,
                         cascade_delay, design_rrc, polyphase_decompose,
                         synthesis)
from .linksim import (BerPoint, ComplexityReport, LinkConfig, add_awgn,
                      complexity_report, qpsk_demodulate, qpsk_modulate,
                      run_link, shape_and_upsample, synchronize)
from .optim import OptimizationReport, OptimizerSettings, check_gradient, minimize

__version__ = "0.1.0"
