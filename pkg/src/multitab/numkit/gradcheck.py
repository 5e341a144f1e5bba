"""Central finite-difference gradient checking."""
import numpy as np

from .tensor import Tensor, backward

DEFAULT_STEP = 1e-5
# entries whose analytic and numeric gradients are both below this are
# compared absolutely rather than relatively
REL_FLOOR = 1e-6


def relative_error(analytic, numeric, floor=REL_FLOOR):
    analytic, numeric = np.asarray(analytic), np.asarray(numeric)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / denom


def numeric_grad(fn, arrays, name, step=DEFAULT_STEP):
    """d fn(arrays) / d arrays[name] by central differences (fn returns a float)."""
    base = arrays[name]
    grad = np.zeros_like(base)
    flat = base.reshape(-1)
    gflat = grad.reshape(-1)
    for k in range(flat.size):
        orig = flat[k]
        flat[k] = orig + step
        up = fn(arrays)
        flat[k] = orig - step
        down = fn(arrays)
        flat[k] = orig
        gflat[k] = (up - down) / (2.0 * step)
    return grad


def analytic_grads(loss_fn, arrays):
    """Wrap ``arrays`` as grad-tracking leaves, evaluate, and backpropagate."""
    leaves = {k: Tensor(v, requires_grad=True, name=k) for k, v in arrays.items()}
    loss = loss_fn(leaves)
    backward(loss)
    return {k: (t.grad if t.grad is not None else np.zeros_like(t.data)) for k, t in leaves.items()}


def check_gradients(loss_fn, arrays, step=DEFAULT_STEP, names=None, corrupt=None):
    """Compare analytic and finite-difference gradients of ``loss_fn``.

    ``loss_fn`` maps a dict of Tensors to a scalar Tensor. Returns
    ``{name: max relative error}``. ``corrupt`` names one array whose
    analytic gradient is deliberately perturbed (detector self-test).
    """
    arrays = {k: np.array(v, dtype=np.float64) for k, v in arrays.items()}
    grads = analytic_grads(loss_fn, arrays)
    if corrupt is not None:
        grads[corrupt] = grads[corrupt] + 1e-2 * (1.0 + np.abs(grads[corrupt]))

    def scalar(current):
        return loss_fn({k: Tensor(v) for k, v in current.items()}).item()

    report = {}
    for name in names or list(arrays):
        num = numeric_grad(scalar, arrays, name, step)
        report[name] = float(relative_error(grads[name], num).max()) if num.size else 0.0
    return report
