from .kmeans import ClusterModel, fit_clusters, kmeans
from .mlp import MlpModel, TrainConfig, TrainReport, neuron_forward, softmax, stratified_split, train_mlp
from .pipeline import (
    TrainedModel,
    aggregate_curve,
    label_dataset,
    noise_success_curve,
    online_finetune,
    predict_params,
    train_pipeline,
)
from .scaling import Scaler

__all__ = [
    "ClusterModel", "fit_clusters", "kmeans",
    "MlpModel", "TrainConfig", "TrainReport", "neuron_forward", "softmax", "stratified_split", "train_mlp",
    "TrainedModel", "aggregate_curve", "label_dataset", "noise_success_curve", "online_finetune",
    "predict_params", "train_pipeline", "Scaler",
]
