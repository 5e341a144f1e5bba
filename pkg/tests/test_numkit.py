import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp
from scipy import stats

from multitab.errors import ContractError, DegenerateRowError, InfeasibleError, ShapeError
from multitab.numkit import (
    Rng,
    Tensor,
    backward,
    check_gradients,
    derive_seed,
    gram_schmidt,
    layernorm,
    matmul,
    sample_normal,
    softmax_rows,
    sym_eig,
)
from multitab.numkit import tensor as T

from oracles import decimal_softmax, layernorm_rows, triple_loop_matmul

finite = st.floats(-5, 5, allow_nan=False, allow_infinity=False)


# ---------------------------------------------------------------- matmul
def test_matmul_identity():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(matmul(Tensor(np.eye(2)), Tensor(a)).data, a)


def test_matmul_projector():
    out = matmul(Tensor([[1.0, 0.0], [0.0, 0.0]]), Tensor([[5.0], [7.0]])).data
    assert np.array_equal(out, [[5.0], [0.0]])


def test_matmul_against_triple_loop():
    rng = np.random.default_rng(1)
    a, b = rng.standard_normal((3, 4)), rng.standard_normal((4, 2))
    assert np.abs(matmul(Tensor(a), Tensor(b)).data - triple_loop_matmul(a, b)).max() < 1e-12


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(ShapeError, match=r"\(2, 3\).*\(2, 3\)"):
        matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))


# --------------------------------------------------------------- softmax
def test_softmax_symmetric_pair():
    assert np.array_equal(softmax_rows(Tensor([[0.0, 0.0]])).data, [[0.5, 0.5]])


def test_softmax_masked_entry_is_exact_zero():
    out = softmax_rows(Tensor([[0.0, -np.inf]])).data
    assert out[0, 0] == 1.0 and out[0, 1] == 0.0


def test_softmax_against_decimal_oracle():
    out = softmax_rows(Tensor([[1.0, 2.0, 3.0]])).data[0]
    assert np.abs(out - decimal_softmax([1.0, 2.0, 3.0])).max() < 1e-15


def test_softmax_fully_masked_row_raises():
    with pytest.raises(DegenerateRowError):
        softmax_rows(Tensor([[0.0, 1.0], [-np.inf, -np.inf]]))


def test_softmax_rows_needs_matrix():
    with pytest.raises(ShapeError):
        softmax_rows(Tensor(np.zeros(3)))


@given(hnp.arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(1, 6)), elements=finite), finite)
def test_softmax_shift_invariance(x, c):
    a = softmax_rows(Tensor(x)).data
    b = softmax_rows(Tensor(x + c)).data
    assert np.abs(a - b).max() < 1e-12
    assert np.abs(a.sum(axis=1) - 1.0).max() < 1e-12
    assert (a >= 0).all()


# ------------------------------------------------------------- layernorm
def test_layernorm_constant_vector_is_zero():
    out = layernorm(Tensor([[3.0, 3.0, 3.0]]), Tensor(np.ones(3)), Tensor(np.zeros(3))).data
    assert np.array_equal(out, np.zeros((1, 3)))


def test_layernorm_already_normalized():
    out = layernorm(Tensor([[1.0, -1.0]]), Tensor(np.ones(2)), Tensor(np.zeros(2)), eps=1e-12).data
    assert np.abs(out - [[1.0, -1.0]]).max() < 1e-11


def test_layernorm_direct_formula():
    x = np.array([[2.0, 4.0, 6.0]])
    out = layernorm(Tensor(x), Tensor(np.ones(3)), Tensor(np.zeros(3))).data
    assert np.abs(out - layernorm_rows(x)).max() < 1e-12


def test_layernorm_rejects_nonpositive_eps():
    with pytest.raises(ContractError):
        layernorm(Tensor(np.ones((1, 2))), Tensor(np.ones(2)), Tensor(np.zeros(2)), eps=0.0)


@given(hnp.arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(2, 8)), elements=finite))
def test_layernorm_moments(x):
    if np.ptp(x, axis=-1).min() < 1e-2:
        return
    eps = 1e-12
    out = layernorm(Tensor(x), Tensor(np.ones(x.shape[1])), Tensor(np.zeros(x.shape[1])), eps=eps).data
    var = x.var(axis=-1)
    assert np.abs(out.mean(axis=-1)).max() < 1e-9
    assert np.abs(out.var(axis=-1) - var / (var + eps)).max() < 1e-9


# -------------------------------------------------------------- backward
def test_backward_sum_gives_ones():
    w = Tensor(np.arange(4.0), requires_grad=True)
    backward(w.sum())
    assert np.array_equal(w.grad, np.ones(4))


def test_backward_square_norm():
    w = Tensor(np.array([1.0, -2.0, 0.5]), requires_grad=True)
    backward((w * w).sum())
    assert np.allclose(w.grad, 2 * w.data, rtol=0, atol=1e-15)


def test_backward_rejects_non_scalar():
    w = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ContractError):
        backward(w * 2.0)


def test_backward_accumulates_shared_nodes():
    w = Tensor(np.array([3.0]), requires_grad=True)
    y = w * w
    backward((y + y).sum())
    assert w.grad[0] == 12.0


_UNARY = [T.exp, T.tanh, T.sigmoid, T.gelu, lambda a: T.log(T.exp(a) + 1.0), lambda a: a ** 3.0]


@given(st.integers(0, len(_UNARY) - 1), st.integers(0, len(_UNARY) - 1), st.integers(0, 10_000))
def test_composition_gradients(i, j, seed):
    rng = np.random.default_rng(seed)
    arrays = {"a": rng.standard_normal((3, 4)), "b": rng.standard_normal((4, 2)),
              "g": rng.standard_normal(2) + 1.0, "c": rng.standard_normal(2)}

    def loss(p):
        h = _UNARY[i](matmul(p["a"], p["b"]))
        h = T.layernorm(h, p["g"], p["c"])
        h = T.softmax(_UNARY[j](h) * 0.5, axis=-1)
        return (h * h).sum()

    report = check_gradients(loss, arrays)
    assert max(report.values()) <= 1e-4


def test_indexing_and_take_gradients():
    rng = np.random.default_rng(5)
    arrays = {"table": rng.standard_normal((5, 3)), "x": rng.standard_normal((2, 4, 3))}
    idx = np.array([0, 4, 4, 1])

    def loss(p):
        rows = T.take(p["table"], idx, axis=0)
        mixed = T.concat([rows.reshape(1, 4, 3), p["x"][:1]], axis=0)
        return (T.transpose(mixed, (2, 0, 1)) ** 2.0).mean() + p["x"][1, 2:].sum()

    assert max(check_gradients(loss, arrays).values()) <= 1e-4


def test_loss_gradients():
    rng = np.random.default_rng(2)
    arrays = {"z": rng.standard_normal((6, 1)), "k": rng.standard_normal((6, 3)), "r": rng.standard_normal((6, 1))}
    yb, yk, yr = rng.integers(0, 2, 6), rng.integers(0, 3, 6), rng.standard_normal(6)

    def loss(p):
        return T.bce_with_logits(p["z"], yb) + T.cross_entropy(p["k"], yk) + T.mse_loss(p["r"], yr)

    assert max(check_gradients(loss, arrays).values()) <= 1e-4


def test_gradcheck_detects_corruption():
    arrays = {"w": np.array([0.3, -0.7])}
    report = check_gradients(lambda p: (T.tanh(p["w"]) ** 2.0).sum(), arrays, corrupt="w")
    assert report["w"] > 1e-4


# ------------------------------------------------------------------- eig
def test_eig_identity():
    res = sym_eig(np.eye(3))
    assert np.allclose(res.eigenvalues, 1.0, atol=1e-15)


def test_eig_uniform_correlation_closed_form():
    p = np.full((3, 3), 0.6) + 0.4 * np.eye(3)
    vals = sym_eig(p).eigenvalues
    assert np.abs(vals - [0.4, 0.4, 2.2]).max() < 1e-12
    # characteristic polynomial oracle
    assert np.abs(np.polyval(np.poly(p), vals)).max() < 1e-10


def test_eig_reconstruction_random_4x4():
    a = np.random.default_rng(3).standard_normal((4, 4))
    p = (a + a.T) / 2
    res = sym_eig(p)
    v, lam = res.eigenvectors, res.eigenvalues
    assert np.abs(v @ np.diag(lam) @ v.T - p).max() < 1e-8
    assert np.abs(v.T @ v - np.eye(4)).max() < 1e-10


def test_eig_rejects_asymmetric():
    with pytest.raises(ContractError):
        sym_eig(np.array([[1.0, 0.5], [0.4, 1.0]]))


@given(hnp.arrays(np.float64, st.integers(1, 7).map(lambda n: (n, n)), elements=finite))
def test_eig_invariants(a):
    p = (a + a.T) / 2
    res = sym_eig(p)
    v, lam = res.eigenvectors, res.eigenvalues
    assert np.all(np.diff(lam) >= 0)
    assert np.abs(v.T @ v - np.eye(len(p))).max() < 1e-10
    assert np.abs(v @ np.diag(lam) @ v.T - p).max() < 1e-8


# ----------------------------------------------------------- gram-schmidt
def test_gram_schmidt_fixed_point():
    q = np.linalg.qr(np.random.default_rng(4).standard_normal((6, 3)))[0].T
    out = gram_schmidt(q.copy(), Rng(0))
    assert np.abs(out - q).max() < 1e-12


def test_gram_schmidt_textbook_step():
    out = gram_schmidt(np.array([[1.0, 0.0], [1.0, 1.0]]), Rng(0))
    assert np.abs(out - np.eye(2)).max() < 1e-15


def test_gram_schmidt_gram_matrix():
    out = gram_schmidt(Rng(11).normal((5, 32)), Rng(12))
    assert np.abs(out @ out.T - np.eye(5)).max() < 1e-10


def test_gram_schmidt_redraws_dependent_row():
    rows = np.array([[1.0, 2.0, 0.0], [2.0, 4.0, 0.0]])
    out = gram_schmidt(rows, Rng(0))
    assert np.abs(out @ out.T - np.eye(2)).max() < 1e-10


def test_gram_schmidt_infeasible():
    with pytest.raises(InfeasibleError):
        gram_schmidt(np.ones((3, 2)), Rng(0))


@given(st.integers(1, 6), st.integers(0, 4), st.integers(0, 2 ** 32))
def test_gram_schmidt_orthonormal(t, extra, seed):
    rng = Rng(seed)
    out = gram_schmidt(rng.normal((t, t + extra)), rng)
    dots = out @ out.T
    assert np.abs(dots - np.diag(np.diag(dots))).max() < 1e-10
    assert np.abs(np.linalg.norm(out, axis=1) - 1.0).max() < 1e-12


# --------------------------------------------------------------------- rng
def test_sample_normal_empty():
    assert sample_normal(Rng(0), (0,)).shape == (0,)


def test_sample_normal_deterministic():
    assert np.array_equal(sample_normal(Rng(9), (4, 3)), sample_normal(Rng(9), (4, 3)))


def test_sample_normal_moments_and_ks():
    x = sample_normal(Rng(2024), (1_000_000,))
    assert abs(x.mean()) < 0.01 and abs(x.var() - 1.0) < 0.01
    assert stats.kstest(x, "norm").statistic < 0.002


def test_derive_seed_streams_differ():
    seeds = {derive_seed(0, r) for r in range(1000)}
    assert len(seeds) == 1000
    assert derive_seed(5, 1, 2) == derive_seed(5, 1, 2) != derive_seed(5, 2, 1)
