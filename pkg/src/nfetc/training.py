"""Optimization orchestration: epochs of mini-batch Adam over a training
corpus, dev-set early stopping, the four named model/data variants, and the
multi-seed evaluation protocol.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .autodiff import gradients
from .corpus import Corpus, build_filtered, windowed
from .embeddings import WordEmbeddings
from .evaluation import Metrics, evaluate
from .hierarchy import TypeForest
from .loss import LossConfig, l2_penalty, mean_nll
from .model import ModelConfig, NfetcModel, bucket_indices
from .optim import AdamState, adam_step, make_rng

VARIANTS = ("NFETC(f)", "NFETC-hier(f)", "NFETC(r)", "NFETC-hier(r)")


class TrainingDiverged(RuntimeError):
    """Raised when the training loss goes non-finite."""


@dataclass(frozen=True)
class HyperParams:
    """Knobs of one training run. Defaults follow the published FIGER
    setting; the OntoNotes profile lives in the CLI."""

    lr: float = 0.0002
    d_p: int = 85
    d_s: int = 180
    p_i: float = 0.7
    p_o: float = 0.9
    lam: float = 0.0
    beta: float = 0.4
    window: int = 10
    batch: int = 512
    epochs: int = 50
    patience: int = 5
    seed: int = 1
    dropout_mention: bool = True

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        for name in ("d_p", "d_s", "window", "batch", "epochs", "patience"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        for name in ("p_i", "p_o"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name} must be in (0, 1], got {v}")
        if self.lam < 0 or self.beta < 0:
            raise ValueError("lam and beta must be >= 0")


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_loss: float
    dev_strict: float
    dev_macro: float
    dev_micro: float

    def line(self) -> str:
        return (f"{self.epoch}, {self.train_loss:.6f}, {self.dev_strict:.4f}, "
                f"{self.dev_macro:.4f}, {self.dev_micro:.4f}\n")


@dataclass
class RunResult:
    epoch_log: list[EpochStats]
    best_epoch: int
    best_dev_strict: float
    best_values: dict[str, np.ndarray]
    final: Metrics | None = None
    checkpoint_path: str | None = None

    @property
    def epochs_run(self) -> int:
        return len(self.epoch_log)


def select_variant(name: str, lam: float = 0.0, beta: float = 0.0,
                   hier_at_inference: bool = False,
                   select_on_adjusted: bool = True) -> tuple[str, LossConfig]:
    """Map a variant name to its corpus choice and loss configuration.

    (f) trains on the single-path filtered corpus with plain cross-entropy;
    (r) trains on everything with the candidate-selecting variant; the -hier
    models add the ancestor-mass adjustment.
    """
    if name not in VARIANTS:
        raise ValueError(f"unknown variant {name!r}; valid names: {', '.join(VARIANTS)}")
    config = LossConfig(
        lam=lam,
        beta=beta,
        mode="variant" if name.endswith("(r)") else "standard",
        hier="-hier" in name,
        hier_at_inference=hier_at_inference,
        select_on_adjusted=select_on_adjusted,
    )
    return ("raw" if name.endswith("(r)") else "filtered"), config


def training_corpus(corpus: Corpus, choice: str, forest: TypeForest) -> Corpus:
    if choice == "raw":
        return corpus
    if choice == "filtered":
        return build_filtered(corpus, forest)
    raise ValueError(f"unknown corpus choice {choice!r}")


def train(train_corpus: Corpus, dev_corpus: Corpus, embeddings: WordEmbeddings,
          forest: TypeForest, hp: HyperParams, config: LossConfig,
          eval_corpus: Corpus | None = None, checkpoint_path: str | None = None,
          log=None) -> RunResult:
    """Mini-batch Adam descent with per-epoch dev evaluation.

    Keeps the parameter snapshot of the best dev strict accuracy seen so far
    and stops after ``hp.patience`` epochs without strict improvement. The
    whole run is a deterministic function of inputs and ``hp.seed``.
    """
    if len(train_corpus) == 0 or len(dev_corpus) == 0:
        raise ValueError("training and dev corpora must be nonempty")
    train_w = list(windowed(train_corpus, hp.window))
    dev_w = windowed(dev_corpus, hp.window)
    rng = make_rng(hp.seed)
    model_config = ModelConfig(
        d_w=embeddings.dim, d_p=hp.d_p, d_s=hp.d_s, k=len(forest),
        window=hp.window, p_in=hp.p_i, p_out=hp.p_o,
        dropout_mention=hp.dropout_mention)
    model = NfetcModel(model_config, embeddings, forest, rng)
    adam = AdamState(model.params)

    epoch_log: list[EpochStats] = []
    best_strict = -1.0
    best_epoch = 0
    best_values = model.params.copy_values()
    stale = 0
    n = len(train_w)
    for epoch in range(1, hp.epochs + 1):
        order = rng.permutation(n)
        loss_total = 0.0
        for lo in range(0, n, hp.batch):
            chunk = [train_w[i] for i in order[lo:lo + hp.batch]]
            parts = None
            for bucket in bucket_indices(chunk):
                sub = [chunk[i] for i in bucket]
                probs, _ = model.forward_bucket(sub, train=True, rng=rng)
                part = mean_nll(probs, sub, config, forest) * (len(sub) / len(chunk))
                parts = part if parts is None else parts + part
            loss = parts + l2_penalty(model.params, config.lam)
            value = float(loss.data)
            if not np.isfinite(value):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}, batch starting at "
                    f"mention {lo} (lr={hp.lr}, seed={hp.seed})")
            adam_step(model.params, gradients(loss, model.params), adam, hp.lr)
            loss_total += value * len(chunk)
        dev = evaluate(model, dev_w, forest, config)
        stats = EpochStats(epoch=epoch, train_loss=loss_total / n,
                           dev_strict=dev.strict, dev_macro=dev.macro_f1,
                           dev_micro=dev.micro_f1)
        epoch_log.append(stats)
        if log is not None:
            log.write(stats.line())
        if dev.strict > best_strict:
            best_strict = dev.strict
            best_epoch = epoch
            best_values = model.params.copy_values()
            stale = 0
        else:
            stale += 1
            if stale >= hp.patience:
                break

    model.params.load_values(best_values)
    result = RunResult(epoch_log=epoch_log, best_epoch=best_epoch,
                       best_dev_strict=best_strict, best_values=best_values)
    if eval_corpus is not None:
        result.final = evaluate(model, windowed(eval_corpus, hp.window), forest, config)
    if checkpoint_path is not None:
        save_checkpoint(checkpoint_path, hp, config, forest, embeddings, model.params)
        result.checkpoint_path = checkpoint_path
    return result


@dataclass
class MultiResult:
    """Aggregate of independent runs: mean and sample standard deviation of
    each final test metric."""

    runs: list[RunResult]
    mean: dict[str, float]
    std: dict[str, float]

    def as_text(self) -> str:
        # metrics are conventionally discussed as percentages
        def cell(key):
            return f"{100 * self.mean[key]:.1f}±{100 * self.std[key]:.1f}"
        return (f"strict={cell('strict')} macro={cell('macro_f1')} "
                f"micro={cell('micro_f1')}\n")


def run_multi(seeds: list[int], train_corpus: Corpus, dev_corpus: Corpus,
              embeddings: WordEmbeddings, forest: TypeForest, hp: HyperParams,
              config: LossConfig, eval_corpus: Corpus, log=None) -> MultiResult:
    """Independent training runs differing only in seed."""
    if not seeds:
        raise ValueError("need at least one seed")
    runs = []
    for s in seeds:
        runs.append(train(train_corpus, dev_corpus, embeddings, forest,
                          dataclasses.replace(hp, seed=s), config,
                          eval_corpus=eval_corpus, log=log))
    mean = {}
    std = {}
    for key in ("strict", "macro_f1", "micro_f1"):
        values = np.array([getattr(r.final, key) for r in runs])
        mean[key] = float(values.mean())
        std[key] = float(values.std(ddof=1)) if len(values) > 1 else 0.0
    return MultiResult(runs=runs, mean=mean, std=std)


# -- checkpoint semantics ------------------------------------------------------

def params_from_values(values: dict[str, np.ndarray]):
    """Rebuild a ParamSet from a value snapshot, preserving order. The word
    embedding matrix is the model's only frozen parameter."""
    from .autodiff import ParamSet
    params = ParamSet()
    for name, arr in values.items():
        params.add(name, arr, trainable=(name != "word_emb"))
    return params


def save_checkpoint(path: str, hp: HyperParams, config: LossConfig,
                    forest: TypeForest, embeddings: WordEmbeddings,
                    params) -> None:
    """Self-contained snapshot: hyperparameters, loss config, type forest,
    vocabulary, and every parameter tensor (the frozen word embedding matrix
    rides along as a parameter)."""
    from . import checkpoint
    meta = {
        "hyperparams": dataclasses.asdict(hp),
        "loss_config": dataclasses.asdict(config),
        "types": forest.types(),
        "vocab": embeddings.words,
    }
    checkpoint.save(path, meta, params)


@dataclass
class Restored:
    model: NfetcModel
    hyperparams: HyperParams
    loss_config: LossConfig
    forest: TypeForest
    embeddings: WordEmbeddings


def load_checkpoint(path: str) -> Restored:
    from . import checkpoint
    meta, params = checkpoint.load(path)
    for key in ("hyperparams", "loss_config", "types", "vocab"):
        if key not in meta:
            raise checkpoint.CheckpointError(f"checkpoint meta lacks {key!r}")
    hp = HyperParams(**meta["hyperparams"])
    config = LossConfig(**meta["loss_config"])
    forest = TypeForest(meta["types"])
    if "word_emb" not in params:
        raise checkpoint.CheckpointError("checkpoint lacks the word embedding matrix")
    embeddings = WordEmbeddings(meta["vocab"], params["word_emb"].data)
    model_config = ModelConfig(
        d_w=embeddings.dim, d_p=hp.d_p, d_s=hp.d_s, k=len(forest),
        window=hp.window, p_in=hp.p_i, p_out=hp.p_o,
        dropout_mention=hp.dropout_mention)
    model = NfetcModel(model_config, embeddings, forest, make_rng(0), params=params)
    return Restored(model=model, hyperparams=hp, loss_config=config,
                    forest=forest, embeddings=embeddings)
