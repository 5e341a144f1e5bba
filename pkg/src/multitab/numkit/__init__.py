"""Numeric kernel: autodiff tensors, Jacobi eigensolver, Gram-Schmidt, seeded RNG."""
from .gradcheck import check_gradients, relative_error
from .linalg import SymEigResult, gram_schmidt, random_orthonormal_rows, sym_eig
from .rng import Rng, derive_seed, sample_normal, splitmix64
from .tensor import (
    Tensor,
    as_tensor,
    backward,
    bce_with_logits,
    broadcast_to,
    concat,
    cross_entropy,
    dropout,
    gelu,
    layernorm,
    matmul,
    mse_loss,
    softmax,
    softmax_rows,
    take,
)

__all__ = [
    "Rng", "SymEigResult", "Tensor", "as_tensor", "backward", "bce_with_logits",
    "broadcast_to", "check_gradients", "concat", "cross_entropy", "derive_seed",
    "dropout", "gelu", "gram_schmidt", "layernorm", "matmul", "mse_loss",
    "random_orthonormal_rows", "relative_error", "sample_normal", "softmax",
    "softmax_rows", "splitmix64", "sym_eig", "take",
]
