"""Small synthetic benchmark comparing set poolings under a linear probe.

The default dataset has two classes whose first two moments agree exactly:
class 0 sets are drawn from ``N(0, I)``, class 1 sets from
``0.5 N(-mu, S) + 0.5 N(mu, S)`` with ``mu = (m, 0, ..., 0)`` and
``S = I - mu mu'``. Poolings that only see means and covariances cannot
separate them; the difference sits in the fourth moment along ``e_1``.

Benchmark config (JSON)::

    {
      "dataset": {"d": 4, "per_class": 200, "points_per_set": 500,
                  "separation": 0.9, "kind": "matched"},
      "methods": ["gap", "max", "gem", "cov", "emperor"],
      "descriptor": {"slices": 32, "components": 2,
                     "em": {"restarts": 1, "max_iters": 100, "rel_tol": 1e-6}},
      "gem_p": 3.0,
      "seeds": [0, 1, 2, 3, 4],
      "train_fraction": 0.7,
      "classifier": {"l2": 1e-3, "epochs": 300, "step": 0.5}
    }

``kind`` is ``matched`` (above), ``shifted`` (class 1 mean moved by ``m``
along ``e_1``, identity covariance) or ``identical`` (both classes
``N(0, I)``). Every key is optional.

Report CSV columns: ``method,seed,train_acc,test_acc``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import errors
from .descriptor import DescriptorConfig, baseline_pool, emperor_descriptor, flatten
from .gmm1d import EMConfig
from .model import MultivariateGMM, PointSet, make_rng, sample_gmm, validate_gmm

METHODS = ("gap", "max", "gem", "cov", "emperor")


@dataclass
class LabeledSetDataset:
    items: list
    n_classes: int
    generators: list
    seed: int

    @property
    def labels(self) -> np.ndarray:
        return np.array([lab for _, lab in self.items])


def class_generators(d: int, separation: float, kind: str = "matched") -> list[MultivariateGMM]:
    m = float(separation)
    eye = np.eye(d)
    base = validate_gmm([1.0], np.zeros((1, d)), eye[None])
    if kind == "identical":
        return [base, base]
    if kind == "shifted":
        mu = np.zeros(d)
        mu[0] = m
        return [base, validate_gmm([1.0], mu[None], eye[None])]
    if kind != "matched":
        raise ValueError(f"unknown dataset kind {kind!r}")
    if not 0 < m < 1:
        raise ValueError(f"separation must lie in (0, 1), got {m}")
    mu = np.zeros(d)
    mu[0] = m
    S = eye - np.outer(mu, mu)
    return [base, validate_gmm([0.5, 0.5], np.stack([-mu, mu]), np.stack([S, S]))]


def synth_matched_moments_dataset(
    d: int, per_class: int, points_per_set: int, separation: float, seed: int, kind: str = "matched"
) -> LabeledSetDataset:
    if per_class < 2:
        raise ValueError("need at least 2 sets per class")
    gens = class_generators(d, separation, kind)
    items = []
    for label, gen in enumerate(gens):
        for i in range(per_class):
            s = int(np.random.SeedSequence(int(seed), spawn_key=(3, label, i)).generate_state(1, np.uint64)[0] >> 1)
            items.append((sample_gmm(gen, points_per_set, s), label))
    return LabeledSetDataset(items, len(gens), gens, int(seed))


@dataclass
class LinearModel:
    weights: np.ndarray  # C x F
    bias: np.ndarray  # C
    feat_mean: np.ndarray
    feat_scale: np.ndarray
    losses: list = field(default_factory=list)

    def scores(self, features) -> np.ndarray:
        X = np.asarray(features, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.feat_mean.size:
            raise errors.WidthMismatch(f"features have shape {X.shape}, model expects width {self.feat_mean.size}")
        Z = (X - self.feat_mean) / self.feat_scale
        return Z @ self.weights.T + self.bias

    def predict(self, features) -> np.ndarray:
        return np.argmax(self.scores(features), axis=1)


def _loss_grad(Z, Y, W, b, l2):
    S = Z @ W.T + b
    S = S - S.max(axis=1, keepdims=True)
    P = np.exp(S)
    P /= P.sum(axis=1, keepdims=True)
    n = Z.shape[0]
    loss = -np.mean(np.log(np.maximum(P[np.arange(n), Y], 1e-300))) + 0.5 * l2 * float(np.sum(W * W))
    G = P
    G[np.arange(n), Y] -= 1.0
    G /= n
    return loss, G.T @ Z + l2 * W, G.sum(axis=0)


def train_linear_classifier(features, labels, *, l2: float = 1e-3, epochs: int = 300, step: float = 0.5, seed: int = 0) -> LinearModel:
    """Multinomial logistic regression, full-batch gradient descent with L2.

    Features are z-scored with statistics of ``features`` (constant columns
    get scale 1). A step that would raise the loss is rejected and the step
    size halved, so the recorded loss never increases.
    """
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=int)
    if not np.all(np.isfinite(X)):
        raise errors.NonFiniteFeature("features contain non-finite values")
    C = int(y.max()) + 1
    if np.unique(y).size < 2:
        raise ValueError("need at least two classes")
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    Z = (X - mean) / scale
    rng = make_rng(seed)
    W = 0.01 * rng.standard_normal((C, X.shape[1]))
    b = np.zeros(C)
    loss, gW, gb = _loss_grad(Z, y, W, b, l2)
    losses = [loss]
    for _ in range(epochs):
        while True:
            W2, b2 = W - step * gW, b - step * gb
            loss2, gW2, gb2 = _loss_grad(Z, y, W2, b2, l2)
            if loss2 <= loss or step < 1e-12:
                break
            step *= 0.5
        if loss2 > loss:
            break
        W, b, loss, gW, gb = W2, b2, loss2, gW2, gb2
        losses.append(loss)
    return LinearModel(W, b, mean, scale, losses)


def evaluate(model: LinearModel, features, labels) -> float:
    y = np.asarray(labels, dtype=int)
    return float(np.mean(model.predict(features) == y))


def stratified_split(labels, train_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    labels = np.asarray(labels)
    rng = make_rng(seed, 4)
    train, test = [], []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        idx = idx[rng.permutation(idx.size)]
        n_tr = int(round(train_fraction * idx.size))
        train.append(idx[:n_tr])
        test.append(idx[n_tr:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


@dataclass(frozen=True)
class BenchConfig:
    d: int = 4
    per_class: int = 200
    points_per_set: int = 500
    separation: float = 0.9
    kind: str = "matched"
    methods: tuple = METHODS
    descriptor: DescriptorConfig = field(
        default_factory=lambda: DescriptorConfig(slices=32, components=2, em=EMConfig(restarts=1, max_iters=100, rel_tol=1e-6))
    )
    gem_p: float = 3.0
    seeds: tuple = (0, 1, 2, 3, 4)
    train_fraction: float = 0.7
    l2: float = 1e-3
    epochs: int = 300
    step: float = 0.5

    @classmethod
    def from_dict(cls, doc: dict) -> "BenchConfig":
        ds = doc.get("dataset", {})
        clf = doc.get("classifier", {})
        desc = dict(doc.get("descriptor", {}))
        em = EMConfig(**{"restarts": 1, "max_iters": 100, "rel_tol": 1e-6, **desc.pop("em", {})})
        base = cls()
        return cls(
            d=int(ds.get("d", base.d)),
            per_class=int(ds.get("per_class", base.per_class)),
            points_per_set=int(ds.get("points_per_set", base.points_per_set)),
            separation=float(ds.get("separation", base.separation)),
            kind=str(ds.get("kind", base.kind)),
            methods=tuple(m.lower() for m in doc.get("methods", base.methods)),
            descriptor=DescriptorConfig(
                slices=int(desc.get("slices", 32)),
                components=int(desc.get("components", 2)),
                em=em,
                direction_scheme=desc.get("direction_scheme", "iid_gaussian_normalized"),
                standardize_slices=bool(desc.get("standardize_slices", False)),
            ),
            gem_p=float(doc.get("gem_p", base.gem_p)),
            seeds=tuple(int(s) for s in doc.get("seeds", base.seeds)),
            train_fraction=float(doc.get("train_fraction", base.train_fraction)),
            l2=float(clf.get("l2", base.l2)),
            epochs=int(clf.get("epochs", base.epochs)),
            step=float(clf.get("step", base.step)),
        )


def features_for(method: str, sets: list[PointSet], config: BenchConfig, seed: int, threads: int = 1) -> np.ndarray:
    if method == "emperor":
        dc = DescriptorConfig(
            slices=config.descriptor.slices,
            components=config.descriptor.components,
            em=config.descriptor.em,
            direction_scheme=config.descriptor.direction_scheme,
            seed=seed,
            standardize_slices=config.descriptor.standardize_slices,
        )

        def fn(ps):
            return flatten(emperor_descriptor(ps, dc))
    elif method in ("gap", "max", "gem", "cov"):

        def fn(ps):
            return baseline_pool(ps, method, p=config.gem_p)
    else:
        raise ValueError(f"unknown method {method!r}")
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return np.array(list(pool.map(fn, sets)))
    return np.array([fn(ps) for ps in sets])


@dataclass
class BenchReport:
    rows: list  # (method, seed, train_acc, test_acc)

    def summary(self) -> dict:
        out = {}
        for method in dict.fromkeys(r[0] for r in self.rows):
            acc = np.array([r[3] for r in self.rows if r[0] == method])
            out[method] = (float(acc.mean()), float(acc.std()))
        return out

    def to_csv(self) -> str:
        lines = ["method,seed,train_acc,test_acc"]
        lines += [f"{m},{s},{tr!r},{te!r}" for m, s, tr, te in self.rows]
        return "\n".join(lines) + "\n"

    def to_table(self) -> str:
        lines = [f"{'method':<10} {'test_acc':>10} {'std':>8}"]
        for m, (mu, sd) in self.summary().items():
            lines.append(f"{m:<10} {mu:>10.4f} {sd:>8.4f}")
        return "\n".join(lines) + "\n"


def run_benchmark(config: BenchConfig, *, threads: int = 1) -> BenchReport:
    rows = []
    for seed in config.seeds:
        ds = synth_matched_moments_dataset(config.d, config.per_class, config.points_per_set, config.separation, seed, config.kind)
        sets = [ps for ps, _ in ds.items]
        y = ds.labels
        tr, te = stratified_split(y, config.train_fraction, seed)
        for method in config.methods:
            try:
                F = features_for(method, sets, config, seed, threads)
                model = train_linear_classifier(F[tr], y[tr], l2=config.l2, epochs=config.epochs, step=config.step, seed=seed)
            except errors.EmperorError as exc:
                raise errors.EmperorError(f"[{method}] {exc}") from exc
            rows.append((method, seed, evaluate(model, F[tr], y[tr]), evaluate(model, F[te], y[te])))
    return BenchReport(rows)
