"""Oracle-efficient differentially private optimization by objective perturbation."""
from .core import (
    ENUMERATION_CAP,
    ContinuousSpace,
    Dataset,
    DiscreteSpace,
    FunctionalDataset,
    LabeledExample,
    LossClassSpec,
    PrivacyBudget,
    SpaceTooLargeError,
    dataset_loss,
    enumerate_space,
    perturbed_loss,
    perturbed_normalized_loss,
    project,
    zero_one_loss,
)
from .noise import RngStream, exponential_vector, gaussian_vector, laplace_vector

__version__ = "0.1.0"

__all__ = [
    "ENUMERATION_CAP",
    "ContinuousSpace",
    "Dataset",
    "DiscreteSpace",
    "FunctionalDataset",
    "LabeledExample",
    "LossClassSpec",
    "PrivacyBudget",
    "SpaceTooLargeError",
    "dataset_loss",
    "enumerate_space",
    "perturbed_loss",
    "perturbed_normalized_loss",
    "project",
    "zero_one_loss",
    "RngStream",
    "exponential_vector",
    "gaussian_vector",
    "laplace_vector",
]
