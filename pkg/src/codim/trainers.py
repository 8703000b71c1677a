"""Training orchestration: self-supervised pre-training, warmup, the
co-divide noisy-label loop, the contrastive semi-supervised trainer, and
the frozen-encoder label-correction step."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import tensor as T
from .contrastive import (AugmentSpec, augment, make_view_batch, self_con_loss,
                          sup_con_loss)
from .data import Dataset
from .errors import ParameterError
from .metrics import auc_score, consistency_metric, test_accuracy
from .mixmatch import (SslHyper, build_semi_batch, co_refine, guess_labels,
                       one_hot, semi_loss, sharpen)
from .models import Arch, DuoModel, Mlp, ModelTriple
from .noise import partition_by_losses
from .tensor import SGD, Tensor

MODES = ("bare", "cssl", "self", "sup")


@dataclass
class TrainConfig:
    pretrain_steps: int = 500
    warmup_epochs: int = 5
    epochs: int = 30
    iters_per_epoch: int = 30
    batch_size: int = 64
    lr: float = 0.05
    lr_drop_epoch: int = -1  # -1: drop at epochs // 2
    lr_drop_factor: float = 10.0
    momentum: float = 0.9
    weight_decay: float = 5e-4
    lambda_cl: float = 1.0
    lambda_sup: float = 1.0
    lambda_self: float = 1.0
    tau1: float = 0.5
    tau2: float = 0.5
    tau3: float = 0.07
    mode: str = "sup"
    ssl: SslHyper = field(default_factory=SslHyper)
    aug: AugmentSpec = field(default_factory=AugmentSpec)
    gmm_threshold: float = 0.5
    label_correction: bool = False
    label_correction_epochs: int = 50
    label_correction_lr: float = 0.05
    feat_hidden: tuple[int, ...] = (64, 64)
    proj_hidden: int = 64
    proj_dim: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ParameterError(f"mode must be one of {MODES}, got {self.mode!r}")
        for name in ("pretrain_steps", "warmup_epochs", "epochs", "iters_per_epoch"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be >= 0")
        if self.lr <= 0 or self.batch_size < 2:
            raise ParameterError("lr must be positive and batch_size >= 2")

    def arch(self, input_dim: int, num_classes: int) -> Arch:
        return Arch(input_dim=input_dim, num_classes=num_classes,
                    feat_hidden=self.feat_hidden, proj_hidden=self.proj_hidden,
                    proj_dim=self.proj_dim)

    def lr_at(self, epoch: int) -> float:
        drop = self.lr_drop_epoch if self.lr_drop_epoch >= 0 else self.epochs // 2
        return self.lr / self.lr_drop_factor if epoch >= drop else self.lr


@dataclass
class EpochMetrics:
    epoch: int
    loss_x: float
    loss_u: float
    loss_reg: float
    loss_cl: float
    test_acc_a: float
    test_acc_b: float
    test_acc_ens: float
    partition_auc: float
    consistency: float


RUN_RECORD_HEADER = ["epoch", "loss_x", "loss_u", "loss_reg", "loss_cl",
                     "test_acc_a", "test_acc_b", "test_acc_ens",
                     "partition_auc", "consistency"]


@dataclass
class RunRecord:
    rows: list[EpochMetrics] = field(default_factory=list)

    @property
    def best_acc(self) -> float:
        return max(r.test_acc_ens for r in self.rows)

    @property
    def last_acc(self) -> float:
        return self.rows[-1].test_acc_ens

    def to_csv(self, path):
        from .metrics import write_csv
        write_csv(path, RUN_RECORD_HEADER,
                  [[r.epoch, repr(r.loss_x), repr(r.loss_u), repr(r.loss_reg),
                    repr(r.loss_cl), repr(r.test_acc_a), repr(r.test_acc_b),
                    repr(r.test_acc_ens), repr(r.partition_auc),
                    repr(r.consistency)] for r in self.rows])


def _rng(*entropy) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(entropy))))


def _draw(rng: np.random.Generator, pool: np.ndarray, size: int) -> np.ndarray:
    if len(pool) == 0:
        return np.array([], dtype=np.intp)
    return rng.choice(pool, size=min(size, len(pool)), replace=False)


def pretrain_selfcon(dataset: Dataset, m: ModelTriple, cfg: TrainConfig) -> list[float]:
    """Self-supervised pre-training: SGD on trunk + projector only.

    Mutates ``m`` in place and returns the per-step loss curve.
    """
    rng = _rng(cfg.seed, 0xA1)
    opt = SGD(m.backbone_params(), lr=cfg.lr, momentum=cfg.momentum,
              weight_decay=cfg.weight_decay)
    losses = []
    for _ in range(cfg.pretrain_steps):
        idx = _draw(rng, np.arange(dataset.n), cfg.batch_size)
        vb = make_view_batch(m, dataset.x[idx], None, cfg.aug, "strong", rng)
        loss = self_con_loss(vb, cfg.tau1)
        opt.zero_grad()
        loss.backward()
        opt.step()
        losses.append(loss.item())
    return losses


def _ce_epoch(m: ModelTriple, opt: SGD, x, labels, num_classes, batch_size, rng):
    order = rng.permutation(len(labels))
    total, count = 0.0, 0
    for start in range(0, len(order), batch_size):
        idx = order[start:start + batch_size]
        loss = T.softmax_cross_entropy(m.forward_logits(x[idx]),
                                       one_hot(labels[idx], num_classes))
        opt.zero_grad()
        loss.backward()
        opt.step()
        total += loss.item()
        count += 1
    return total / max(count, 1)


def warmup(dataset: Dataset, duo: DuoModel, warmup_epochs: int,
           cfg: TrainConfig) -> DuoModel:
    """Plain CE on all noisy labels for both networks, independent shuffles."""
    for j, net in enumerate(duo.nets):
        rng = _rng(cfg.seed, 0xB2, j)
        opt = SGD(net.params(), lr=cfg.lr, momentum=cfg.momentum,
                  weight_decay=cfg.weight_decay)
        for _ in range(warmup_epochs):
            _ce_epoch(net, opt, dataset.x, dataset.noisy_labels,
                      dataset.num_classes, cfg.batch_size, rng)
    return duo


def label_correction(dataset: Dataset, m: ModelTriple, cfg: TrainConfig) -> Dataset:
    """Train a throwaway linear head on the frozen feature space with CE over
    all noisy labels, then replace every training label with its argmax.
    ``m`` is left untouched."""
    rng = _rng(cfg.seed, 0xC3)
    feats = m.feat.forward_np(dataset.x)
    head = Mlp([feats.shape[1], dataset.num_classes], rng)
    opt = SGD(head.params("head"), lr=cfg.label_correction_lr,
              momentum=cfg.momentum, weight_decay=cfg.weight_decay)
    targets = one_hot(dataset.noisy_labels, dataset.num_classes)
    for _ in range(cfg.label_correction_epochs):
        order = rng.permutation(dataset.n)
        for start in range(0, dataset.n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss = T.softmax_cross_entropy(head.forward(Tensor(feats[idx])),
                                           targets[idx])
            opt.zero_grad()
            loss.backward()
            opt.step()
    new_labels = np.argmax(head.forward_np(feats), axis=1)
    return dataset.with_labels(new_labels)


class CodimTrainer:
    """Owns the two-network co-divide training loop."""

    def __init__(self, dataset: Dataset, cfg: TrainConfig,
                 pretrained_state: dict | None = None):
        self.dataset = dataset
        self.cfg = cfg
        arch = cfg.arch(dataset.dim, dataset.num_classes)
        self.base = ModelTriple(arch, seed=cfg.seed)
        self.pretrained_state = pretrained_state
        self.duo: DuoModel | None = None
        self.opts: list[SGD] | None = None
        self.pretrain_losses: list[float] = []
        self.post_warmup_consistency: float | None = None
        self.final_consistency: float | None = None

    def _optimizers(self):
        opts = []
        for net in self.duo.nets:
            params = net.params() if self.cfg.mode != "bare" else {
                **net.feat.params("feat"), **net.cls.params("cls")}
            opts.append(SGD(params, lr=self.cfg.lr, momentum=self.cfg.momentum,
                            weight_decay=self.cfg.weight_decay))
        return opts

    def prepare(self):
        """Phase 1: pre-train, build the duo, warm up, optional relabeling."""
        cfg = self.cfg
        if self.pretrained_state is not None:
            self.base.load_state_dict(self.pretrained_state)
        else:
            self.pretrain_losses = pretrain_selfcon(self.dataset, self.base, cfg)
        self.duo = DuoModel.from_pretrained(self.base, seed_a=cfg.seed + 101,
                                            seed_b=cfg.seed + 202)
        warmup(self.dataset, self.duo, cfg.warmup_epochs, cfg)
        if cfg.label_correction:
            self.dataset = label_correction(self.dataset, self.base, cfg)
        self.opts = self._optimizers()
        self.post_warmup_consistency = self.measure_consistency(0xFFFF)

    def _contrastive_loss(self, net, x_lab, labels_lab, x_unl, rng):
        cfg = self.cfg
        if cfg.mode == "bare":
            return None
        clean_views = make_view_batch(net, x_lab, labels_lab, cfg.aug, "strong", rng)
        if cfg.mode == "self":
            return self_con_loss(clean_views, cfg.tau2)
        l_cl = sup_con_loss(clean_views, cfg.tau3)
        if cfg.mode == "cssl" and len(x_unl) >= 2:
            noisy_views = make_view_batch(net, x_unl, None, cfg.aug, "strong", rng)
            l_cl = l_cl + self_con_loss(noisy_views, cfg.tau2)
        return l_cl

    def epoch(self, epoch: int) -> EpochMetrics:
        cfg, data = self.cfg, self.dataset
        for opt in self.opts:
            opt.lr = cfg.lr_at(epoch)
        # co-divide: each net's partition comes from the peer's losses
        partitions = [
            partition_by_losses(self.duo.net_b, data.x, data.noisy_labels,
                                cfg.gmm_threshold),
            partition_by_losses(self.duo.net_a, data.x, data.noisy_labels,
                                cfg.gmm_threshold),
        ]
        sums = {"lx": 0.0, "lu": 0.0, "lreg": 0.0, "lcl": 0.0}
        steps = 0
        for it in range(cfg.iters_per_epoch):
            for j, (net, opt, part) in enumerate(zip(self.duo.nets, self.opts,
                                                     partitions)):
                rng = _rng(cfg.seed, 0xD4, epoch, it, j)
                lab_idx = _draw(rng, part.clean_idx, cfg.batch_size)
                unl_idx = _draw(rng, part.noisy_idx, cfg.batch_size)
                if len(lab_idx) < 2:
                    continue
                x_lab = data.x[lab_idx]
                noisy_lab = data.noisy_labels[lab_idx]
                # weak views answer label queries, strong views carry gradients
                own_pred = np.zeros((len(lab_idx), data.num_classes))
                for _ in range(cfg.ssl.num_augs):
                    own_pred += net.predict_proba(augment(x_lab, cfg.aug, "weak", rng))
                own_pred /= cfg.ssl.num_augs
                refined = co_refine(part.clean_prob[lab_idx],
                                    one_hot(noisy_lab, data.num_classes),
                                    own_pred, cfg.ssl.sharpen_t)
                if len(unl_idx) > 0:
                    x_unl = data.x[unl_idx]
                    guessed = guess_labels(self.duo, x_unl, cfg.aug, cfg.ssl, rng)
                    x_unl_s = augment(x_unl, cfg.aug, "strong", rng)
                else:
                    x_unl = x_unl_s = np.zeros((0, data.dim))
                    guessed = np.zeros((0, data.num_classes))
                x_lab_s = augment(x_lab, cfg.aug, "strong", rng)
                batch = build_semi_batch(x_lab_s, refined, x_unl_s, guessed,
                                         cfg.ssl.mixup_alpha, rng)
                lx, lu, lreg, l_semi = semi_loss(net, batch, cfg.ssl, float(epoch))
                l_cl = self._contrastive_loss(net, x_lab, noisy_lab, x_unl, rng)
                total = l_semi if l_cl is None else l_semi + T.scale(l_cl, cfg.lambda_cl)
                opt.zero_grad()
                total.backward()
                opt.step()
                sums["lx"] += lx.item()
                sums["lu"] += lu.item()
                sums["lreg"] += lreg.item()
                sums["lcl"] += 0.0 if l_cl is None else l_cl.item()
                steps += 1
        denom = max(steps, 1)
        if data.flip_mask.any() and not data.flip_mask.all():
            auc = float(np.mean([auc_score(p.clean_prob, ~data.flip_mask)
                                 for p in partitions]))
        else:
            auc = 0.5  # no planted noise to score against
        return EpochMetrics(
            epoch=epoch,
            loss_x=sums["lx"] / denom, loss_u=sums["lu"] / denom,
            loss_reg=sums["lreg"] / denom, loss_cl=sums["lcl"] / denom,
            test_acc_a=test_accuracy(self.duo.net_a.predict_proba,
                                     data.test_x, data.test_labels),
            test_acc_b=test_accuracy(self.duo.net_b.predict_proba,
                                     data.test_x, data.test_labels),
            test_acc_ens=test_accuracy(self.duo.ensemble_proba,
                                       data.test_x, data.test_labels),
            partition_auc=auc,
            consistency=self.measure_consistency(epoch),
        )

    def measure_consistency(self, tag: int) -> float:
        return consistency_metric(self.duo.net_a, self.dataset.x, self.cfg.aug,
                                  n_neighbors=8, rng=_rng(self.cfg.seed, 0xE5, tag))

    def run(self) -> tuple[DuoModel, RunRecord]:
        self.prepare()
        record = RunRecord()
        for epoch in range(self.cfg.epochs):
            record.rows.append(self.epoch(epoch))
        # paired with post_warmup_consistency: same perturbation draws,
        # so the warmup-vs-trained comparison is not washed out by
        # estimator variance
        self.final_consistency = self.measure_consistency(0xFFFF)
        return self.duo, record


def train_codim(dataset: Dataset, cfg: TrainConfig,
                pretrained_state: dict | None = None) -> tuple[DuoModel, RunRecord]:
    return CodimTrainer(dataset, cfg, pretrained_state=pretrained_state).run()


def train_ce(dataset: Dataset, cfg: TrainConfig) -> tuple[ModelTriple, RunRecord]:
    """Cross-entropy baseline: one network, noisy labels, no pre-training."""
    net = ModelTriple(cfg.arch(dataset.dim, dataset.num_classes), seed=cfg.seed)
    opt = SGD(net.params(), lr=cfg.lr, momentum=cfg.momentum,
              weight_decay=cfg.weight_decay)
    rng = _rng(cfg.seed, 0xF6)
    record = RunRecord()
    for epoch in range(cfg.epochs):
        opt.lr = cfg.lr_at(epoch)
        loss = 0.0
        for _ in range(cfg.iters_per_epoch):
            idx = _draw(rng, np.arange(dataset.n), cfg.batch_size)
            batch_loss = T.softmax_cross_entropy(
                net.forward_logits(dataset.x[idx]),
                one_hot(dataset.noisy_labels[idx], dataset.num_classes))
            opt.zero_grad()
            batch_loss.backward()
            opt.step()
            loss += batch_loss.item()
        acc = test_accuracy(net.predict_proba, dataset.test_x, dataset.test_labels)
        record.rows.append(EpochMetrics(
            epoch=epoch, loss_x=loss / max(cfg.iters_per_epoch, 1), loss_u=0.0,
            loss_reg=0.0, loss_cl=0.0, test_acc_a=acc, test_acc_b=acc,
            test_acc_ens=acc, partition_auc=0.5,
            consistency=consistency_metric(net, dataset.x, cfg.aug, 8,
                                           _rng(cfg.seed, 0xE5, epoch))))
    return net, record


def train_cssl(dataset: Dataset, labeled_mask: np.ndarray,
               cfg: TrainConfig) -> tuple[ModelTriple, RunRecord]:
    """Multi-task contrastive semi-supervised training on trusted labels.

    One network; supervised contrastive loss on labeled batches, self
    contrastive loss on unlabeled batches, plus the semi-supervised
    objective. ``lambda_sup == lambda_self == 0`` is the plain-SSL baseline.
    """
    labeled_mask = np.asarray(labeled_mask, dtype=bool)
    net = ModelTriple(cfg.arch(dataset.dim, dataset.num_classes), seed=cfg.seed)
    pretrain_selfcon(dataset, net, cfg)
    solo = DuoModel(net, net)  # co-guessing degenerates to single-net guessing
    opt = SGD(net.params(), lr=cfg.lr, momentum=cfg.momentum,
              weight_decay=cfg.weight_decay)
    lab_pool = np.flatnonzero(labeled_mask)
    unl_pool = np.flatnonzero(~labeled_mask)
    record = RunRecord()
    for epoch in range(cfg.epochs):
        opt.lr = cfg.lr_at(epoch)
        sums = {"lx": 0.0, "lu": 0.0, "lreg": 0.0, "lcl": 0.0}
        for it in range(cfg.iters_per_epoch):
            rng = _rng(cfg.seed, 0x17, epoch, it)
            lab_idx = _draw(rng, lab_pool, cfg.batch_size)
            unl_idx = _draw(rng, unl_pool, cfg.batch_size)
            x_lab = dataset.x[lab_idx]
            y_lab = one_hot(dataset.noisy_labels[lab_idx], dataset.num_classes)
            if len(unl_idx) > 0:
                x_unl = dataset.x[unl_idx]
                guessed = guess_labels(solo, x_unl, cfg.aug, cfg.ssl, rng)
                x_unl_s = augment(x_unl, cfg.aug, "strong", rng)
            else:
                x_unl = x_unl_s = np.zeros((0, dataset.dim))
                guessed = np.zeros((0, dataset.num_classes))
            x_lab_s = augment(x_lab, cfg.aug, "strong", rng)
            batch = build_semi_batch(x_lab_s, y_lab, x_unl_s, guessed,
                                     cfg.ssl.mixup_alpha, rng)
            lx, lu, lreg, total = semi_loss(net, batch, cfg.ssl, float(epoch))
            lcl_val = 0.0
            if cfg.lambda_sup > 0 and len(lab_idx) >= 2:
                vb = make_view_batch(net, x_lab, dataset.noisy_labels[lab_idx],
                                     cfg.aug, "strong", rng)
                l_sup = sup_con_loss(vb, cfg.tau3)
                total = total + T.scale(l_sup, cfg.lambda_sup)
                lcl_val += l_sup.item()
            if cfg.lambda_self > 0 and len(unl_idx) >= 2:
                vb = make_view_batch(net, x_unl, None, cfg.aug, "strong", rng)
                l_self = self_con_loss(vb, cfg.tau2)
                total = total + T.scale(l_self, cfg.lambda_self)
                lcl_val += l_self.item()
            opt.zero_grad()
            total.backward()
            opt.step()
            sums["lx"] += lx.item()
            sums["lu"] += lu.item()
            sums["lreg"] += lreg.item()
            sums["lcl"] += lcl_val
        acc = test_accuracy(net.predict_proba, dataset.test_x, dataset.test_labels)
        denom = max(cfg.iters_per_epoch, 1)
        record.rows.append(EpochMetrics(
            epoch=epoch, loss_x=sums["lx"] / denom, loss_u=sums["lu"] / denom,
            loss_reg=sums["lreg"] / denom, loss_cl=sums["lcl"] / denom,
            test_acc_a=acc, test_acc_b=acc, test_acc_ens=acc, partition_auc=0.5,
            consistency=consistency_metric(net, dataset.x, cfg.aug, 8,
                                           _rng(cfg.seed, 0xE5, epoch))))
    return net, record
