"""Contrastive losses against brute-force double-loop oracles, plus
augmentation and view-batch mechanics."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from codim import tensor as T
from codim.contrastive import (AugmentSpec, ViewBatch, augment, make_view_batch,
                               self_con_loss, sup_con_loss)
from codim.errors import DegenerateInputError, ParameterError
from codim.models import Arch, ModelTriple
from codim.tensor import Tensor

from conftest import check_gradients, rng_for


def random_view_batch(rng, k, dim, num_classes=None):
    z = rng.normal(size=(2 * k, dim))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    labels = None
    if num_classes is not None:
        labels = np.repeat(rng.integers(0, num_classes, size=k), 2)
    return ViewBatch(z=Tensor(z, requires_grad=True),
                     source_index=np.repeat(np.arange(k), 2), labels=labels)


def brute_self_con(z, source_index, tau):
    n = len(z)
    total = 0.0
    for i in range(n):
        sibling = [j for j in range(n) if j != i and source_index[j] == source_index[i]]
        assert len(sibling) == 1
        pos = z[i] @ z[sibling[0]] / tau
        denom = sum(np.exp(z[i] @ z[j] / tau) for j in range(n) if j != i)
        total += -(pos - np.log(denom))
    return total / n


def brute_sup_con(z, labels, tau):
    n = len(z)
    terms = []
    for i in range(n):
        positives = [j for j in range(n) if j != i and labels[j] == labels[i]]
        if not positives:
            continue
        denom = np.log(sum(np.exp(z[i] @ z[j] / tau) for j in range(n) if j != i))
        inner = sum(z[i] @ z[j] / tau - denom for j in positives) / len(positives)
        terms.append(-inner)
    return sum(terms) / len(terms)


# ------------------------------------------------------------ hand cases

def test_self_con_orthonormal_hand_value():
    # 2 sources, views = 4 orthonormal rows: every similarity is 0 except
    # self (masked out), so each anchor sees uniform odds over 3 candidates.
    v = ViewBatch(z=Tensor(np.eye(4)), source_index=np.array([0, 0, 1, 1]))
    assert self_con_loss(v, tau=1.0).item() == pytest.approx(np.log(3.0), abs=1e-12)


def test_sup_con_orthonormal_hand_value():
    v = ViewBatch(z=Tensor(np.eye(4)), source_index=np.array([0, 0, 1, 1]),
                  labels=np.array([0, 0, 0, 0]))
    # all views share a label: mean positive similarity 0, denominator log 3
    assert sup_con_loss(v, tau=1.0).item() == pytest.approx(np.log(3.0), abs=1e-12)


def test_self_con_identical_views_hand_value():
    # sibling is a perfect match at similarity 1/tau; the two other rows are
    # orthogonal
    z = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]])
    v = ViewBatch(z=Tensor(z), source_index=np.array([0, 0, 1, 1]))
    tau = 0.5
    denom = np.exp(1.0 / tau) + 2.0 * np.exp(0.0)
    want = -(1.0 / tau - np.log(denom))
    assert self_con_loss(v, tau).item() == pytest.approx(want, abs=1e-12)


# ------------------------------------------------------------ oracles

def test_losses_match_brute_force_on_50_random_batches():
    for case in range(50):
        rng = rng_for(0xB0, case)
        k = int(rng.integers(2, 9))
        dim = int(rng.integers(2, 17))
        v = random_view_batch(rng, k, dim, num_classes=3)
        tau = float(rng.uniform(0.05, 2.0))
        got_self = self_con_loss(v, tau).item()
        want_self = brute_self_con(v.z.data, v.source_index, tau)
        assert abs(got_self - want_self) <= 1e-10
        if np.unique(v.labels).size < 2 * k:  # at least one positive exists
            got_sup = sup_con_loss(v, tau).item()
            want_sup = brute_sup_con(v.z.data, v.labels, tau)
            assert abs(got_sup - want_sup) <= 1e-10


def test_sup_con_reduces_to_self_con_with_distinct_labels():
    # one view per "class": give each SOURCE a unique label so the only
    # positive of each anchor is its sibling view, recovering the
    # self-supervised loss exactly
    for case in range(10):
        rng = rng_for(0xB1, case)
        k = int(rng.integers(2, 8))
        v = random_view_batch(rng, k, 8)
        v.labels = np.repeat(np.arange(k), 2)
        a = self_con_loss(v, 0.3).item()
        b = sup_con_loss(v, 0.3).item()
        assert a == pytest.approx(b, abs=1e-14)


def test_losses_invariant_to_view_permutation():
    rng = rng_for(0xB2)
    v = random_view_batch(rng, 6, 5, num_classes=3)
    base_self = self_con_loss(v, 0.4).item()
    base_sup = sup_con_loss(v, 0.4).item()
    for _ in range(5):
        perm = rng.permutation(12)
        pv = ViewBatch(z=Tensor(v.z.data[perm]), source_index=v.source_index[perm],
                       labels=v.labels[perm])
        assert abs(self_con_loss(pv, 0.4).item() - base_self) <= 1e-12
        assert abs(sup_con_loss(pv, 0.4).item() - base_sup) <= 1e-12


def test_sup_con_skips_anchor_without_positives():
    rng = rng_for(0xB3)
    v = random_view_batch(rng, 3, 4)
    v.source_index = np.array([0, 1, 2, 3, 4, 5])  # no sibling pairs
    v.labels = np.array([0, 0, 1, 2, 3, 4])  # only the first two share a label
    got = sup_con_loss(v, 0.7).item()
    want = brute_sup_con(v.z.data, v.labels, 0.7)
    assert got == pytest.approx(want, abs=1e-12)
    assert np.isfinite(got)


def test_contrastive_losses_finite_difference():
    for case in range(20):
        rng = rng_for(0xB4, case)
        v = random_view_batch(rng, 4, 5, num_classes=2)
        check_gradients(lambda: self_con_loss(v, 0.5), [v.z])
        check_gradients(lambda: sup_con_loss(v, 0.5), [v.z])


def test_loss_validation():
    rng = rng_for(0xB5)
    v = random_view_batch(rng, 4, 3)
    with pytest.raises(ParameterError):
        self_con_loss(v, 0.0)
    with pytest.raises(DegenerateInputError):
        self_con_loss(random_view_batch(rng, 1, 3), 0.5)
    with pytest.raises(DegenerateInputError):
        sup_con_loss(v, 0.5)  # no labels
    v.labels = np.arange(8)  # nobody has a positive
    with pytest.raises(DegenerateInputError):
        sup_con_loss(v, 0.5)


@settings(max_examples=25, deadline=None)
@given(k=st.integers(2, 6), dim=st.integers(2, 8),
       tau=st.floats(0.05, 3.0), seed=st.integers(0, 10_000))
def test_self_con_positive_and_finite(k, dim, tau, seed):
    v = random_view_batch(rng_for(seed), k, dim)
    val = self_con_loss(v, tau).item()
    assert np.isfinite(val)
    # lse over >=3 candidates strictly exceeds the single positive term
    assert val > 0.0


# ------------------------------------------------------------ augmentation

def test_augment_spec_validation():
    with pytest.raises(ParameterError):
        AugmentSpec(weak_jitter_sigma=0.5, strong_jitter_sigma=0.1)
    with pytest.raises(ParameterError):
        AugmentSpec(mask_prob=1.5)
    with pytest.raises(ParameterError):
        AugmentSpec(scale_range=(1.2, 1.4))


def test_augment_statistics():
    spec = AugmentSpec(weak_jitter_sigma=0.1, strong_jitter_sigma=0.3,
                       mask_prob=0.25, scale_range=(0.9, 1.1))
    x = np.zeros((4000, 5))
    rng = rng_for(0xA0)
    weak = augment(x, spec, "weak", rng)
    assert weak.std() == pytest.approx(0.1, rel=0.05)
    strong = augment(np.ones((4000, 5)), spec, "strong", rng)
    assert (strong == 0.0).mean() == pytest.approx(0.25, abs=0.02)
    with pytest.raises(ParameterError):
        augment(x, spec, "medium", rng)


def test_augment_deterministic_under_seed():
    spec = AugmentSpec()
    x = rng_for(1).normal(size=(10, 3))
    a = augment(x, spec, "strong", rng_for(42))
    b = augment(x, spec, "strong", rng_for(42))
    assert np.array_equal(a, b)


def test_make_view_batch_interleaves_pairs():
    arch = Arch(input_dim=3, num_classes=2)
    m = ModelTriple(arch, seed=0)
    x = rng_for(2).normal(size=(5, 3))
    labels = np.array([0, 1, 0, 1, 1])
    vb = make_view_batch(m, x, labels, AugmentSpec(), "weak", rng_for(3))
    assert vb.num_views == 10
    assert np.array_equal(vb.source_index, np.repeat(np.arange(5), 2))
    assert np.array_equal(vb.labels, np.repeat(labels, 2))
    # rows are unit-norm projections
    assert np.allclose((vb.z.data ** 2).sum(axis=1), 1.0, atol=1e-12)
    with pytest.raises(DegenerateInputError):
        make_view_batch(m, np.zeros((0, 3)), None, AugmentSpec(), "weak", rng_for(4))
