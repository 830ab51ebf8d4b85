"""Mask-based MVDR and multi-tap (spatio-temporal) MVDR beamforming with complex masks."""
from .beamformer import BeamformerWeights, apply, solve_multitap_mvdr, solve_mvdr
from .covariance import CovarianceStack, TapStack, covariance_complex_mask, covariance_real_mask, stack_taps
from .features import ArrayGeometry, default_geometry, directional_feature, ipd, steering_vector
from .kernels import BACKEND
from .masks import MaskTensor, complement_noise_mask, complex_mask, relu_mask, sigmoid_mask
from .metrics import ScoreReport, score_systems, si_snr, snr
from .pipeline import SYSTEMS, SystemSpec, enhance, enhance_scene
from .roomsim import SceneConfig, SimulatedScene, TestsetPolicy, generate_testset, render_scene, simulate_rir
from .signal import ComplexSpectrogram, StftConfig, TimeSignal, istft, stft

__version__ = "0.1.0"
