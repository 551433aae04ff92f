"""Motion simulation, k-space line outlier detection and T2* mapping on
synthetic multicoil multi-echo gradient-echo data."""

from .detector import (
    DetectorConfig,
    MaskPredictor,
    Subject,
    binarize_mask,
    evaluate_masks,
    optimize_masks,
    predictor_forward,
    predictor_init,
)
from .forward import (
    ExclusionMask,
    KSpaceData,
    MotionTrajectory,
    RigidState,
    adjoint,
    apply_mask,
    apply_rigid,
    fft2c,
    forward_model,
    ground_truth_mask,
    ifft2c,
    make_trajectory,
    sense_forward,
)
from .metrics import DetectionScores, MetricReport, detection_scores, mae, ssim
from .phantom import (
    CoilMaps,
    EchoSeries,
    PhantomSpec,
    PhantomVolume,
    make_coil_maps,
    make_phantom,
    synthesize_echoes,
)
from .physloss import LossReport, mask_regularizer, pearson_rho, physics_loss, total_loss
from .quantify import QuantMaps, fit_t2star, predict_signal
from .recon import (
    DenoiserSpec,
    ReconConfig,
    dc_gradient_step,
    denoise,
    orba_reconstruct,
    random_mask,
    unrolled_reconstruct,
    variable_density_mask,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
