"""Maximum-entropy quantum state tomography of freely dissociating fragments."""
from .grid import GridSpec, PhysicalConstants, iodine_constants, make_grid, natural_constants, paper_grid
from .maxent import (DensityMatrix, FitReport, MeasurementRecord, OptimizerOptions, density_from_lambda,
                     entropy, expectations, objective, reconstruct)
from .projectors import (MOMENTUM, ObservableSet, ProjectorMatrix, build_observable_set, momentum_projector,
                         position_projector)
from .synth import (Component, StateRecipe, SyntheticDataset, build_state, evolve, paper_recipe, sample_dataset,
                    superposition_recipe)
from .wigner import WignerGrid, marginals, shear_evolve, wigner_from_density

__version__ = "0.1.0"

__all__ = [
    "GridSpec", "PhysicalConstants", "iodine_constants", "make_grid", "natural_constants", "paper_grid",
    "DensityMatrix", "FitReport", "MeasurementRecord", "OptimizerOptions", "density_from_lambda", "entropy",
    "expectations", "objective", "reconstruct",
    "MOMENTUM", "ObservableSet", "ProjectorMatrix", "build_observable_set", "momentum_projector",
    "position_projector",
    "Component", "StateRecipe", "SyntheticDataset", "build_state", "evolve", "paper_recipe", "sample_dataset",
    "superposition_recipe",
    "WignerGrid", "marginals", "shear_evolve", "wigner_from_density",
]
