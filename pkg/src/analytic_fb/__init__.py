"""Analytic filterbanks for speech separation: transforms, masks and metrics."""

from .errors import (AnalyticFBError, ConditioningError, ConfigError, DegenerateSignalError,
                     FormatError, InvalidStepError, ShapeError)
from .filterbank import (Family, Filterbank, FilterbankConfig, ParamSincParams,
                         build_filterbank, build_free_filterbank, build_param_sinc,
                         build_stft_filterbank, discrete_hilbert, filter_frequency_response,
                         init_param_frequencies, load_filterbank, make_analytic_bank,
                         save_filterbank)
from .masking import Mask, MaskKind, apply_mask, ideal_masks, irm
from .metrics import ScoreReport, pit_score, si_sdr, si_sdr_improvement
from .signal import (FrameGrid, MixtureSpec, Waveform, frame_signal, mix_sources,
                     overlap_add, read_wav, write_wav)
from .transform import InputRep, TFRepresentation, analyze, input_representation, synthesize

__version__ = "0.1.0"
