from glw.translate.translator import GlwTranslator, LossWeights
from glw.translate.losses import (
    PairSet, cycle_loss, demi_cycle_loss, distribution_loss, supervised_align_loss,
)
from glw.translate.procrustes import procrustes_oracle
from glw.translate.retrieval import nearest, retrieval_accuracy, retrieval_at_1
from glw.translate.structural import StructuralReport, fit_whitening, structural_init
from glw.translate.training import TrainSchedule, TrainingReport, evaluate_losses, loss_terms, train_glw

__all__ = [
    "GlwTranslator", "LossWeights", "PairSet", "cycle_loss", "demi_cycle_loss", "distribution_loss",
    "supervised_align_loss", "procrustes_oracle", "nearest", "retrieval_accuracy", "retrieval_at_1",
    "StructuralReport", "fit_whitening", "structural_init", "TrainSchedule", "TrainingReport",
    "evaluate_losses", "loss_terms", "train_glw",
]
