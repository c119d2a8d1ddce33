ARRAY_MAGIC = b"DPARR\x00"
ARRAY_FORMAT_VERSION = 1

CHECKPOINT_MAGIC = b"DPCKPT"
CHECKPOINT_FORMAT_VERSION = 1

MANIFEST_FILENAME = "manifest.json"
DATASET_FORMAT_VERSION = 1

PSNR_CAP_DB = 100.0  # reported for identical clips
EWARP_SCALE = 1e3  # warping error is reported x10^3

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03

PROBABILITY_CLAMP = 1e-6  # adversarial log terms clamp p to [eps, 1 - eps]

DEFAULT_BETA = 0.25
DEFAULT_LAMBDA_ADV = 0.8
DEFAULT_LAMBDA_CE = 0.5
DEFAULT_LAMBDA_TEMP = 0.1

DEFAULT_STAGE1_LR = 8e-5
DEFAULT_STAGE2_LR = 3e-5

DEFAULT_T_STAR = 1.0

DCT_BLOCK = 8

# IJG base luminance quantization table
JPEG_LUMA_TABLE = (
    (16, 11, 10, 16, 24, 40, 51, 61),
    (12, 12, 14, 19, 26, 58, 60, 55),
    (14, 13, 16, 24, 40, 57, 69, 56),
    (14, 17, 22, 29, 51, 87, 80, 62),
    (18, 22, 37, 56, 68, 109, 103, 77),
    (24, 35, 55, 64, 81, 104, 113, 92),
    (49, 64, 78, 87, 103, 121, 120, 101),
    (72, 92, 95, 98, 112, 100, 103, 99),
)
