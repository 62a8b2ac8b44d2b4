"""Central finite-difference gradient checking, shared by the unit and
acceptance suites. Everything runs in float64."""

import numpy as np

EPS = 1e-5


def relative_error(a, b):
    """Guarded relative error: magnitudes below finite-difference noise
    (1e-7 on float64 at eps 1e-5) count as exact zeros, and the denominator
    is floored so tiny-but-real gradients are judged on absolute error."""
    scale = max(abs(a), abs(b))
    if scale < 1e-7:
        return 0.0
    return abs(a - b) / max(scale, 1e-3)


def _reseed_dropout(layer, seed):
    if hasattr(layer, "rate"):
        layer.rng = np.random.default_rng(seed)
    for attr in ("conv1", "bn1", "conv2", "bn2", "proj_conv", "proj_bn"):
        sub = getattr(layer, attr, None)
        if sub is not None and hasattr(sub, "rate"):
            sub.rng = np.random.default_rng(seed)


def check_layer(layer, x, train=True, eps=EPS, n_coords=6, seed=0):
    """Max relative error of input and parameter gradients versus central
    differences, probing ``n_coords`` random coordinates per tensor.

    The layer must be built in float64; dropout layers are reseeded before
    every forward so the mask stays fixed across evaluations.
    """
    rng = np.random.default_rng(seed + 12345)

    def run(xv):
        _reseed_dropout(layer, seed)
        return layer.forward(xv, train)

    out = run(x)
    upstream = rng.standard_normal(out.shape)

    def loss(xv):
        return float((run(xv) * upstream).sum())

    run(x)
    grad_in = layer.backward(upstream)

    errs = []
    for _ in range(n_coords):
        ix = tuple(int(rng.integers(0, s)) for s in x.shape)
        xp = x.copy()
        xp[ix] += eps
        xm = x.copy()
        xm[ix] -= eps
        numeric = (loss(xp) - loss(xm)) / (2.0 * eps)
        errs.append(relative_error(numeric, grad_in[ix]))

    run(x)
    layer.backward(upstream)
    grads = layer.grads()
    for name, param in layer.params().items():
        analytic = grads[name].copy()
        for _ in range(n_coords):
            ix = tuple(int(rng.integers(0, s)) for s in param.shape)
            original = param[ix]
            param[ix] = original + eps
            lp = loss(x)
            param[ix] = original - eps
            lm = loss(x)
            param[ix] = original
            numeric = (lp - lm) / (2.0 * eps)
            errs.append(relative_error(numeric, analytic[ix]))
    return max(errs)
