"""Numpy implementation of the training kernel.

Mirrors ``_kernels.pyx`` operation for operation; used when the compiled
extension is unavailable or ``LDU_BACKEND=python`` is set.

Conventions shared with the extension:

* ``weights[l]`` has shape (out, in), ``biases[l]`` shape (out,)
* ``acts[l]`` is 0 for identity, 1 for sigmoid
* ``defer`` selects the defer loss (last output is the defer class, weight
  ``alpha``); otherwise plain cross-entropy
* gradients are of the batch-mean loss
"""
import numpy as np

NAME = "python"


def _sigmoid(z):
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-z))


def _forward(weights, biases, acts, x):
    hs = [x]
    h = x
    for w, b, act in zip(weights, biases, acts):
        h = h @ w.T + b
        if act == 1:
            h = _sigmoid(h)
        hs.append(h)
    return hs


def _loss_and_output_delta(z, targets, alpha, defer):
    nb = z.shape[0]
    m = z.max(axis=1, keepdims=True)
    lse = m + np.log(np.exp(z - m).sum(axis=1, keepdims=True))
    rows = np.arange(nb)
    a = alpha if defer else 0.0
    per = -z[rows, targets] + (1.0 + a) * lse[:, 0]
    if defer:
        per -= a * z[:, -1]
    delta = (1.0 + a) * np.exp(z - lse)
    delta[rows, targets] -= 1.0
    if defer:
        delta[:, -1] -= a
    return per.sum() / nb, delta / nb


def _backward(weights, acts, hs, delta, grad_w, grad_b):
    for l in range(len(weights) - 1, -1, -1):
        if acts[l] == 1:
            h = hs[l + 1]
            delta = delta * (h * (1.0 - h))
        grad_w[l][...] = delta.T @ hs[l]
        grad_b[l][...] = delta.sum(axis=0)
        if l > 0:
            delta = delta @ weights[l]


def loss_and_grads(weights, biases, acts, x, targets, alpha, defer, grad_w, grad_b):
    """Fill ``grad_w``/``grad_b`` in place and return the mean loss."""
    hs = _forward(weights, biases, acts, x)
    loss, delta = _loss_and_output_delta(hs[-1], targets, alpha, defer)
    _backward(weights, acts, hs, delta, grad_w, grad_b)
    return loss


def train_epochs(*args):
    """Run every epoch in ``orders`` (one row of sample indices per epoch).

    Parameters and optimiser moments are updated in place.  ``losses``
    receives the pre-update batch loss of each step.  Returns the index of
    the first step with a non-finite loss, or -1.
    """
    # divergence is reported through the return value
    with np.errstate(over="ignore", invalid="ignore"):
        return _train_epochs(*args)


def _train_epochs(weights, biases, acts, x, targets, alpha, defer, orders, batch_size,
                   optimizer, lr, weight_decay, beta1, beta2, eps, m_w, m_b, v_w, v_b,
                  step0, losses):
    grad_w = [np.empty_like(w) for w in weights]
    grad_b = [np.empty_like(b) for b in biases]
    n = x.shape[0]
    step = 0
    for order in orders:
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            loss = loss_and_grads(weights, biases, acts, x[idx], targets[idx], alpha, defer,
                                  grad_w, grad_b)
            losses[step] = loss
            if not np.isfinite(loss):
                return step
            t = step0 + step + 1
            params = list(zip(weights, grad_w, m_w, v_w)) + list(zip(biases, grad_b, m_b, v_b))
            for p, g, m, v in params:
                if weight_decay != 0.0:
                    g += weight_decay * p
                if optimizer == 0:
                    p -= lr * g
                else:
                    m *= beta1
                    m += (1.0 - beta1) * g
                    v *= beta2
                    v += (1.0 - beta2) * (g * g)
                    mhat = m / (1.0 - beta1 ** t)
                    vhat = v / (1.0 - beta2 ** t)
                    p -= lr * mhat / (np.sqrt(vhat) + eps)
            step += 1
    return -1
