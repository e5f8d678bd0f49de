"""Learn matrix-configuration models of data sets and estimate intrinsic
dimension from the spectral gap of the induced quantum metric.

Submodules are imported lazily so the command-line entry point can cap BLAS
thread counts before any numerical library loads.
"""

from importlib import import_module

__version__ = "0.1.0"

_SUBMODULES = (
    "baselines",
    "cli",
    "datasets",
    "errors",
    "estimator",
    "geometry",
    "linalg",
    "model",
    "training",
)

_API = {
    "EigenSystem": "linalg",
    "eig_hermitian": "linalg",
    "expectation": "linalg",
    "matrix_element": "linalg",
    "hermitize": "linalg",
    "MatrixConfiguration": "model",
    "QuasiCoherentState": "model",
    "error_hamiltonian": "model",
    "quasi_coherent": "model",
    "position": "model",
    "quantum_fluctuation": "model",
    "energy_decomposition": "model",
    "fluctuation_bound": "model",
    "save_config": "model",
    "load_config": "model",
    "TrainConfig": "training",
    "TrainingReport": "training",
    "init_config": "training",
    "loss": "training",
    "loss_gradient": "training",
    "train": "training",
    "PointCloud": "geometry",
    "QuantumMetric": "geometry",
    "GapEstimate": "geometry",
    "point_cloud": "geometry",
    "quantum_metric": "geometry",
    "hessian_energy": "geometry",
    "spectral_gap_ratio": "geometry",
    "spectral_gap_rmt": "geometry",
    "marchenko_pastur_median": "geometry",
    "DimensionReport": "estimator",
    "estimate_dimensions": "estimator",
    "aggregate": "estimator",
    "Dataset": "datasets",
    "gen_sphere": "datasets",
    "gen_circle": "datasets",
    "gen_swiss_roll": "datasets",
    "gen_hypercube": "datasets",
    "add_feature_scaled_noise": "datasets",
    "standardize": "datasets",
    "load_table": "datasets",
    "save_table": "datasets",
    "BaselineResult": "baselines",
    "twonn": "baselines",
    "mle_dimension": "baselines",
}

__all__ = sorted(set(_API) | set(_SUBMODULES))


def __getattr__(name):
    if name in _SUBMODULES:
        return import_module(f".{name}", __name__)
    owner = _API.get(name)
    if owner is None:
        raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
    return getattr(import_module(f".{owner}", __name__), name)


def __dir__():
    return __all__ + [n for n in globals() if not n.startswith("_")]
