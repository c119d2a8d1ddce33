from .models import TERM_NAMES, LossReport, LossWeights, weighted_total
from .networks import Discriminator, FeatureExtractor
from .objectives import (
    LossOutput,
    code_cross_entropy,
    code_feature_loss,
    discriminator_loss,
    discriminator_step,
    feature_loss,
    generator_adversarial,
    stage0_loss,
    stage1_loss,
    stage1p_loss,
    stage2_loss,
    temporal_loss,
)
