from .quality import frame_psnr, gaussian_window, psnr, ssim, ssim_map, warping_error
from .report import ClipMetrics, EvalReport, evaluate_clip
