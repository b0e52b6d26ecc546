"""Minimal dense and recurrent networks with hand-written reverse-mode gradients.

These stand in for the large encoders used at scale: a few dense layers
(`DenseNet`) and a tanh recurrent cell (`SimpleRecurrentCell`).  Gradients
are written out by hand and checked against central differences, so every
downstream loss can be audited end to end.
"""

import json

import numpy as np

from .params import ParamVector
from .rng import derive_rng

_NONLINEARITIES = ("tanh", "logistic", "identity")

CHECKPOINT_FORMAT = "ebmlab-params"
CHECKPOINT_VERSION = 1


def _act(z, kind):
    if kind == "tanh":
        return np.tanh(z)
    if kind == "logistic":
        return 1.0 / (1.0 + np.exp(-z))
    return z


def _act_grad_from_output(a, kind):
    if kind == "tanh":
        return 1.0 - a * a
    if kind == "logistic":
        return a * (1.0 - a)
    return np.ones_like(a)


class DenseNet:
    """Fully-connected feedforward network.

    ``sizes`` chains input through hidden layers to the output;
    ``nonlinearities`` names one activation per weight layer.  Weights are
    initialized uniformly in [-0.1, 0.1] from the given stream, biases zero.
    """

    def __init__(self, sizes, nonlinearities=None, seed=0, rng=None):
        self.sizes = [int(s) for s in sizes]
        n_layers = len(self.sizes) - 1
        if n_layers < 1:
            raise ValueError("need at least one layer")
        if nonlinearities is None:
            nonlinearities = ["tanh"] * (n_layers - 1) + ["identity"]
        if len(nonlinearities) != n_layers:
            raise ValueError("one nonlinearity per layer required")
        for nl in nonlinearities:
            if nl not in _NONLINEARITIES:
                raise ValueError(f"unknown nonlinearity {nl!r}")
        self.nonlinearities = list(nonlinearities)
        rng = rng if rng is not None else derive_rng(seed, "densenet")
        self.weights = [
            rng.uniform(-0.1, 0.1, size=(self.sizes[i + 1], self.sizes[i]))
            for i in range(n_layers)
        ]
        self.biases = [np.zeros(self.sizes[i + 1]) for i in range(n_layers)]

    @property
    def n_in(self):
        return self.sizes[0]

    @property
    def n_out(self):
        return self.sizes[-1]

    def forward(self, x):
        """All layer activations, batched over leading axis when x is 2-D."""
        a = np.asarray(x, dtype=np.float64)
        squeeze = a.ndim == 1
        if squeeze:
            a = a[None, :]
        if a.shape[1] != self.n_in:
            raise ValueError(f"input size {a.shape[1]} != expected {self.n_in}")
        activations = [a]
        for W, b, nl in zip(self.weights, self.biases, self.nonlinearities):
            a = _act(activations[-1] @ W.T + b, nl)
            activations.append(a)
        return {"activations": activations, "squeeze": squeeze}

    def output(self, x) -> np.ndarray:
        cache = self.forward(x)
        out = cache["activations"][-1]
        return out[0] if cache["squeeze"] else out

    def backward(self, cache, output_grad):
        """Gradients of a scalar with the given output gradient.

        Returns (param_grad ParamVector, input_grad); parameter gradients are
        summed over the batch.
        """
        activations = cache["activations"]
        g = np.asarray(output_grad, dtype=np.float64)
        if g.ndim == 1:
            g = g[None, :]
        if g.shape != activations[-1].shape:
            raise ValueError("output gradient does not match forward activations")
        grads = ParamVector()
        slots = [None] * len(self.weights)
        for i in range(len(self.weights) - 1, -1, -1):
            dz = g * _act_grad_from_output(activations[i + 1], self.nonlinearities[i])
            slots[i] = (dz.T @ activations[i], dz.sum(axis=0))
            g = dz @ self.weights[i]
        for i, (dW, db) in enumerate(slots):
            grads.add(f"W{i}", dW)
            grads.add(f"b{i}", db)
        input_grad = g[0] if cache["squeeze"] else g
        return grads, input_grad

    # -- parameter plumbing ----------------------------------------------
    def param_vector(self) -> ParamVector:
        pv = ParamVector()
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            pv.add(f"W{i}", W)
            pv.add(f"b{i}", b)
        return pv

    def set_param_vector(self, pv: ParamVector) -> None:
        for i in range(len(self.weights)):
            self.weights[i] = pv[f"W{i}"].copy()
            self.biases[i] = pv[f"b{i}"].copy()

    def get_flat_params(self) -> np.ndarray:
        return self.param_vector().flat()

    def set_flat_params(self, values) -> None:
        pv = self.param_vector()
        pv.set_flat(values)
        self.set_param_vector(pv)


class SimpleRecurrentCell:
    """Tanh recurrent cell unrolled over a sequence.

    h_t = tanh(Wx x_t + Wh h_{t-1} + b), h_0 = 0.
    """

    def __init__(self, input_size, hidden_size, seed=0, rng=None):
        self.input_size = int(input_size)
        self.hidden_size = int(hidden_size)
        rng = rng if rng is not None else derive_rng(seed, "srcell")
        self.Wx = rng.uniform(-0.1, 0.1, size=(self.hidden_size, self.input_size))
        self.Wh = rng.uniform(-0.1, 0.1, size=(self.hidden_size, self.hidden_size))
        self.b = np.zeros(self.hidden_size)

    def forward(self, inputs, h0=None):
        """Hidden states for a (T, input_size) sequence; returns (T+1, H) incl. h0."""
        inputs = np.asarray(inputs, dtype=np.float64)
        if inputs.ndim != 2 or inputs.shape[1] != self.input_size:
            raise ValueError("inputs must be (T, input_size)")
        T = inputs.shape[0]
        hs = np.zeros((T + 1, self.hidden_size))
        if h0 is not None:
            hs[0] = np.asarray(h0, dtype=np.float64)
        for t in range(T):
            hs[t + 1] = np.tanh(self.Wx @ inputs[t] + self.Wh @ hs[t] + self.b)
        return {"inputs": inputs, "hs": hs}

    def step(self, x_t, h_prev):
        return np.tanh(self.Wx @ np.asarray(x_t, dtype=np.float64)
                       + self.Wh @ np.asarray(h_prev, dtype=np.float64) + self.b)

    def backward(self, cache, hidden_grads):
        """BPTT for a scalar whose gradient w.r.t. each h_t (t>=1) is given.

        ``hidden_grads`` is (T, H).  Returns (param_grad ParamVector, input_grads).
        """
        inputs, hs = cache["inputs"], cache["hs"]
        T = inputs.shape[0]
        hidden_grads = np.asarray(hidden_grads, dtype=np.float64)
        if hidden_grads.shape != (T, self.hidden_size):
            raise ValueError("hidden_grads must be (T, hidden_size)")
        dWx = np.zeros_like(self.Wx)
        dWh = np.zeros_like(self.Wh)
        db = np.zeros_like(self.b)
        dinputs = np.zeros_like(inputs)
        carry = np.zeros(self.hidden_size)
        for t in range(T - 1, -1, -1):
            dh = hidden_grads[t] + carry
            dz = dh * (1.0 - hs[t + 1] ** 2)
            dWx += np.outer(dz, inputs[t])
            dWh += np.outer(dz, hs[t])
            db += dz
            dinputs[t] = self.Wx.T @ dz
            carry = self.Wh.T @ dz
        grads = ParamVector({"Wx": dWx, "Wh": dWh, "b": db})
        return grads, dinputs

    def param_vector(self) -> ParamVector:
        return ParamVector({"Wx": self.Wx, "Wh": self.Wh, "b": self.b})

    def set_param_vector(self, pv: ParamVector) -> None:
        self.Wx = pv["Wx"].copy()
        self.Wh = pv["Wh"].copy()
        self.b = pv["b"].copy()

    def get_flat_params(self) -> np.ndarray:
        return self.param_vector().flat()

    def set_flat_params(self, values) -> None:
        pv = self.param_vector()
        pv.set_flat(values)
        self.set_param_vector(pv)


# ---------------------------------------------------------------------------
# checkpoints: versioned JSON of named blocks, lossless at float64
# ---------------------------------------------------------------------------

def save_checkpoint(path, param_vector: ParamVector, meta=None) -> None:
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "meta": meta or {},
        "blocks": param_vector.to_json_dict(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_checkpoint(path):
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"not a parameter checkpoint: {path}")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('version')}")
    return ParamVector.from_json_dict(payload["blocks"]), payload.get("meta", {})
