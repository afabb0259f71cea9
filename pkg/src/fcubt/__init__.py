"""Model-based clustering of multivariate functional data with unsupervised binary trees."""

from .fdata import MultiFunData, RawCurve, SamplingGrid, UnivariateSample, inner_product
from .gmm import EmConfig, GaussianMixture, bic, fit_em, select_k
from .metrics import ari
from .mfpca import MfpcaModel, fit_mfpca, project, reconstruct
from .simulate import scenario1, scenario2, scenario3, simulate
from .smoothing import smooth_curves, smooth_sample
from .tree import FCUBT, ClusterTree, FcubtConfig, Partition, grow, join, predict

__version__ = "0.1.0"

__all__ = [
    "ClusterTree", "EmConfig", "FCUBT", "FcubtConfig", "GaussianMixture", "MfpcaModel", "MultiFunData",
    "Partition", "RawCurve", "SamplingGrid", "UnivariateSample", "ari", "bic", "fit_em", "fit_mfpca",
    "grow", "inner_product", "join", "predict", "project", "reconstruct", "scenario1", "scenario2",
    "scenario3", "select_k", "simulate", "smooth_curves", "smooth_sample",
]
