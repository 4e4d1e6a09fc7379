"""Glue between the tuner's dataset and the classifier.

Parameter rows are clustered; each environment vector is labelled with the
cluster of its tuned parameters; the network learns env -> cluster; at
execution time the predicted cluster's centroid is the controller setting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ModelMismatch
from ..evm import INTEGER_GATES, PARAM_KEYS, ControllerParams
from ..scenario import ENV_DIM, N_PROBES, EnvVector
from ..tuner import derive_seed, evaluate
from .kmeans import ClusterModel, fit_clusters
from .mlp import MlpModel, TrainConfig, TrainReport, stratified_split, train_mlp
from .scaling import Scaler

# finite stand-in for a disabled function (t_total = inf) while clustering
T_TOTAL_CAP = 1000.0
ONEHOT = slice(3 + N_PROBES, ENV_DIM)
_TOTAL_COLS = [PARAM_KEYS.index("c_t_total"), PARAM_KEYS.index("b_t_total")]


def encode_params(rows) -> np.ndarray:
    P = np.array(rows, dtype=float)
    if P.ndim != 2 or P.shape[1] != len(PARAM_KEYS):
        raise ModelMismatch(f"parameter rows must have {len(PARAM_KEYS)} columns, got shape {P.shape}")
    P[:, _TOTAL_COLS] = np.minimum(P[:, _TOTAL_COLS], T_TOTAL_CAP)
    return P


def decode_params(vec) -> ControllerParams:
    v = np.clip(np.asarray(vec, dtype=float), 0.0, None)
    d = dict(zip(PARAM_KEYS, (float(x) for x in v)))
    for k in PARAM_KEYS:
        if k[2:] in INTEGER_GATES:
            d[k] = float(round(d[k]))
        elif k.endswith("t_total") and d[k] >= T_TOTAL_CAP:
            d[k] = math.inf
    return ControllerParams.from_dict(d)


@dataclass(eq=False)
class TrainedModel:
    env_scaler: Scaler
    clusters: ClusterModel
    mlp: MlpModel
    seed: int = 0
    report: TrainReport | None = field(default=None, repr=False)

    @property
    def k(self) -> int:
        return self.clusters.k

    def classify(self, env_rows) -> np.ndarray:
        X = np.atleast_2d(np.asarray(env_rows, dtype=float))
        if X.shape[1] != self.env_scaler.dim:
            raise ModelMismatch(f"model expects {self.env_scaler.dim} env values, got {X.shape[1]}")
        return self.mlp.predict(self.env_scaler.transform(X))

    def centroid_params(self, cluster: int) -> ControllerParams:
        raw = self.clusters.scaler.inverse_transform(self.clusters.centroids[cluster])
        return decode_params(raw)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "seed": self.seed,
            "env_scaler": self.env_scaler.to_dict(),
            "param_scaler": self.clusters.scaler.to_dict(),
            "param_keys": list(PARAM_KEYS),
            "t_total_cap": T_TOTAL_CAP,
            "centroids": self.clusters.centroids.tolist(),
            "dropout_rate": self.mlp.dropout_rate,
            "sizes": self.mlp.sizes,
            "layers": self.mlp.to_dict()["layers"],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainedModel":
        try:
            centroids = np.asarray(d["centroids"], dtype=float)
            param_scaler = Scaler.from_dict(d["param_scaler"])
            cm = ClusterModel(int(d["k"]), centroids, np.zeros(0, dtype=int), float("nan"), param_scaler)
            mlp = MlpModel.from_dict({"layers": d["layers"], "dropout_rate": d.get("dropout_rate", 0.0)})
            model = cls(Scaler.from_dict(d["env_scaler"]), cm, mlp, int(d.get("seed", 0)))
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelMismatch(f"malformed model file: {exc}") from None
        if centroids.shape != (model.k, len(PARAM_KEYS)) or mlp.sizes[-1] != model.k:
            raise ModelMismatch("centroid / output-layer dimensions disagree with k")
        if mlp.sizes[0] != model.env_scaler.dim:
            raise ModelMismatch("input layer does not match the env scaler")
        return model


def label_dataset(env_rows, param_rows, cm: ClusterModel, train_idx=None):
    """Cluster label per row plus env features scaled on the training rows.

    Returns ``(X_scaled, labels, env_scaler)``.
    """
    env = np.asarray(env_rows, dtype=float)
    P = encode_params(param_rows)
    if P.shape[1] != cm.centroids.shape[1] or cm.scaler is None:
        raise ModelMismatch(f"parameter rows have {P.shape[1]} columns, clusters have {cm.centroids.shape[1]}")
    if len(env) != len(P):
        raise ModelMismatch("env and parameter rows differ in count")
    labels = cm.assign(cm.scaler.transform(P))
    fit_rows = env if train_idx is None else env[np.asarray(train_idx)]
    scaler = Scaler.fit(fit_rows)
    return scaler.transform(env), labels, scaler


def train_pipeline(env_rows, param_rows, k: int = 10, config: TrainConfig = TrainConfig()):
    """fit_clusters -> label_dataset -> train_mlp. Returns ``(model, report, split)``."""
    P = encode_params(param_rows)
    cm = fit_clusters(P, k, seed=derive_seed(config.seed, 0xC1))
    labels = cm.assignments
    split = stratified_split(labels, config.test_fraction, config.seed)
    X, labels, env_scaler = label_dataset(env_rows, param_rows, cm, split[0])
    mlp, report = train_mlp(X, labels, k, config, split)
    return TrainedModel(env_scaler, cm, mlp, config.seed, report), report, split


def predict_params(model: TrainedModel, env) -> ControllerParams:
    vec = env.to_vector() if isinstance(env, EnvVector) else list(env)
    cluster = int(model.classify([vec])[0])
    return model.centroid_params(cluster)


def _reproject_onehot(Z: np.ndarray, scaler: Scaler) -> np.ndarray:
    raw = scaler.inverse_transform(Z)
    block = raw[..., ONEHOT]
    hot = np.zeros_like(block)
    np.put_along_axis(hot, np.argmax(block, axis=-1)[..., None], 1.0, axis=-1)
    raw[..., ONEHOT] = hot
    Z = Z.copy()
    Z[..., ONEHOT] = scaler.transform(raw)[..., ONEHOT]
    return Z


def noise_success_curve(model: TrainedModel, env_rows, labels, sigmas, trials: int = 100, seed: int = 0):
    """Success rate per true cluster when the env is perturbed by Gaussian noise.

    Noise is in scaled feature units. Every level reuses the same standard
    normal draws (scaled by sigma), so levels differ only in magnitude.
    Returns rows ``(cluster, sigma, success_rate, trials)``.
    """
    X = model.env_scaler.transform(np.asarray(env_rows, dtype=float))
    labels = np.asarray(labels, dtype=int)
    if len(X) == 0:
        raise ValueError("need at least one test row")
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((trials, *X.shape))
    out = []
    for sigma in sigmas:
        if sigma < 0:
            raise ValueError("sigma must be >= 0")
        noisy = X[None, :, :] + sigma * Z
        if sigma > 0:
            noisy = _reproject_onehot(noisy, model.env_scaler)
        pred = model.mlp.predict(noisy.reshape(-1, X.shape[1])).reshape(trials, len(X))
        hits = pred == labels[None, :]
        for c in np.unique(labels):
            out.append((int(c), float(sigma), float(hits[:, labels == c].mean()), int(trials)))
    return out


def aggregate_curve(curve, labels) -> dict[float, float]:
    """Overall success rate per sigma, clusters weighted by their row counts."""
    counts = {int(c): int(n) for c, n in zip(*np.unique(np.asarray(labels), return_counts=True))}
    num: dict[float, float] = {}
    den: dict[float, int] = {}
    for c, sigma, rate, _ in curve:
        num[sigma] = num.get(sigma, 0.0) + rate * counts[c]
        den[sigma] = den.get(sigma, 0) + counts[c]
    return {s: num[s] / den[s] for s in num}


DEFAULT_STEPS = {"f_q": 0.5, "f_eb": 0.5, "f_nd": 0.5, "f_ai": 0.5, "t_q": 1, "t_eb": 1, "t_ev": 1,
                 "t_nd": 0.1, "t_total": 1.0}


@dataclass
class FinetuneResult:
    params: ControllerParams
    objective: float
    history: list[float]
    evals: int
    accepted: int


def online_finetune(incumbent: ControllerParams, scenario, steps=None, iterations: int = 20, seed: int = 0,
                    replications: int = 3) -> FinetuneResult:
    """Hill climbing: nudge one random parameter by +/- its step, keep strict improvements."""
    steps = dict(DEFAULT_STEPS, **(steps or {}))
    step_of = {k: float(steps.get(k, steps.get(k[2:]))) for k in PARAM_KEYS}
    for k in PARAM_KEYS:
        if k[2:] in INTEGER_GATES:
            step_of[k] = float(max(1, round(step_of[k])))
    rng = np.random.default_rng(derive_seed(seed, 0xF17E))
    if iterations <= 0:
        return FinetuneResult(incumbent, math.nan, [], 0, 0)
    obj = evaluate(scenario, incumbent, replications)
    evals, accepted = 1, 0
    history = [obj]
    for _ in range(iterations):
        key = PARAM_KEYS[int(rng.integers(len(PARAM_KEYS)))]
        sign = 1.0 if rng.random() < 0.5 else -1.0
        d = incumbent.to_dict()
        d[key] = max(0.0, d[key] + sign * step_of[key])
        cand = ControllerParams.from_dict(d)
        if cand != incumbent:
            o = evaluate(scenario, cand, replications)
            evals += 1
            if o < obj:
                incumbent, obj = cand, o
                accepted += 1
        history.append(obj)
    return FinetuneResult(incumbent, obj, history, evals, accepted)
