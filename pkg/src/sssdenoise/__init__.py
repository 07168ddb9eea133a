"""Single-image self-supervised denoising for side-scan sonar, with
classical baselines and quality indexes."""

from .image import GrayImage, crop, load_pgm, pad_reflect, save_pgm
from .metrics import MetricReport, epi, fi, mse, psnr, ssim
from .self2self import PredictConfig, TrainConfig, denoise, predict_ensemble, train

__version__ = "0.1.0"
