"""From-scratch model families: ridge/logistic/SVC classifiers, linear
regression, and a small MLP regressor.

All fits standardize features internally and are deterministic given a
seed. The convex families optimize with full-batch L-BFGS (plain gradient
descent with backtracking is also provided, mainly as a cross-check);
closed forms are used where they exist.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FAMILIES = ("ridge", "logreg", "svc", "linreg", "mlp")
CLASSIFIERS = ("ridge", "logreg", "svc")
REGRESSORS = ("linreg", "mlp")


class FitError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    """Per-family hyperparameters plus the evaluation protocol knobs."""
    family: str = "ridge"
    ridge_alpha: float = 1.0
    logreg_c: float = 0.1
    logreg_max_iter: int = 4000
    logreg_tol: float = 1e-4
    svc_c: float = 1.0
    svc_max_iter: int = 1000
    mlp_hidden: tuple = (32, 16)
    mlp_lr: float = 5e-2
    mlp_epochs: int = 60
    mlp_batch: int = 128
    seed: int = 0
    split_frac: float = 0.8
    repeats: int = 10

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown model family {self.family!r}")
        if not (0.0 < self.split_frac < 1.0):
            raise ValueError("split_frac must be in (0, 1)")
        if self.repeats < 1:
            raise ValueError("repeats must be positive")

    def hyper(self) -> dict:
        """Keyword arguments for this family's fit function."""
        return {
            "ridge": {"alpha": self.ridge_alpha},
            "logreg": {"C": self.logreg_c, "max_iter": self.logreg_max_iter,
                       "tol": self.logreg_tol},
            "svc": {"C": self.svc_c, "max_iter": self.svc_max_iter},
            "linreg": {},
            "mlp": {"hidden": tuple(self.mlp_hidden), "lr": self.mlp_lr,
                    "epochs": self.mlp_epochs, "batch": self.mlp_batch},
        }[self.family]


@dataclass
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @staticmethod
    def fit(X: np.ndarray) -> "Standardizer":
        # accumulate moments in ~128MB float64 chunks; np.std(dtype=f64)
        # materializes a full float64 deviations copy, which alone is 3GB+
        # on a 5M x 74 float32 matrix
        X = np.asarray(X)
        n, d = X.shape
        total = np.zeros(d, dtype=np.float64)
        total_sq = np.zeros(d, dtype=np.float64)
        step = max(1, (1 << 24) // max(d, 1))
        for lo in range(0, n, step):
            blk = X[lo:lo + step].astype(np.float64)
            total += blk.sum(axis=0)
            total_sq += np.einsum("ij,ij->j", blk, blk)
        mean = total / n
        scale = np.sqrt(np.maximum(total_sq / n - mean * mean, 0.0))
        scale[scale == 0] = 1.0
        return Standardizer(mean, scale)

    def transform(self, X: np.ndarray, overwrite: bool = False) -> np.ndarray:
        if overwrite and isinstance(X, np.ndarray) and \
                X.dtype == np.float32 and X.flags.writeable:
            X -= self.mean
            X /= self.scale
            return X
        X = np.asarray(X)
        out = np.empty(X.shape, dtype=np.float32)
        step = max(1, (1 << 24) // max(X.shape[1], 1))
        for lo in range(0, len(X), step):  # chunked: no full float64 temp
            np.subtract(X[lo:lo + step], self.mean, out=out[lo:lo + step])
            out[lo:lo + step] /= self.scale
        return out


@dataclass
class ModelParams:
    family: str
    schema_version: str
    standardizer: Standardizer
    hyper: dict
    seed: int
    # linear families use (w, b); the MLP uses layers [(W, b), ...]
    w: np.ndarray | None = None
    b: float = 0.0
    layers: list = field(default_factory=list)

    def decision(self, X: np.ndarray) -> np.ndarray:
        Z = self.standardizer.transform(np.asarray(X))
        if self.family == "mlp":
            return _mlp_forward(self.layers, Z)[-1].ravel()
        return (Z @ self.w.astype(Z.dtype) + self.b).astype(np.float64)

    def predict(self, X: np.ndarray) -> np.ndarray:
        s = self.decision(X)
        if self.family in CLASSIFIERS:
            return (s > 0).astype(np.int64)
        if self.family == "linreg":
            return np.clip(s, 0.0, 1.0)
        return s

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        if self.family != "logreg":
            raise ValueError("probabilities are only defined for logreg")
        return _sigmoid(self.decision(X))


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


# ---------------------------------------------------------------------------
# convex optimization helper


def gradient_descent(objective, x0: np.ndarray, max_iter: int, tol: float):
    """Full-batch descent with Armijo backtracking.

    `objective(x)` returns (loss, grad). Stops when ||grad||_2 <= tol or
    the iteration budget runs out; returns (x, n_iter, final_grad_norm).
    """
    x = x0.astype(np.float64)
    loss, grad = objective(x)
    if not np.isfinite(loss):
        raise FitError("non-finite loss at the starting point")
    step = 1.0
    for it in range(max_iter):
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= tol:
            return x, it, gnorm
        step *= 2.0  # let the step recover after conservative iterations
        for _ in range(60):
            cand = x - step * grad
            cand_loss, cand_grad = objective(cand)
            if cand_loss <= loss - 0.5 * step * gnorm * gnorm:
                break
            step *= 0.5
        else:
            return x, it, gnorm  # no descent step found at float precision
        x, loss, grad = cand, cand_loss, cand_grad
        if not np.isfinite(loss):
            raise FitError("objective diverged to a non-finite loss")
    return x, max_iter, float(np.linalg.norm(grad))


def lbfgs(objective, x0: np.ndarray, max_iter: int, tol: float,
          memory: int = 10):
    """Limited-memory BFGS with Armijo backtracking.

    Same contract as `gradient_descent` but converges in far fewer
    iterations on ill-conditioned convex objectives, which matters on
    multi-million-row design matrices.
    """
    x = x0.astype(np.float64)
    loss, grad = objective(x)
    if not np.isfinite(loss):
        raise FitError("non-finite loss at the starting point")
    s_hist, y_hist, rho_hist = [], [], []
    for it in range(max_iter):
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= tol:
            return x, it, gnorm
        # two-loop recursion for the search direction
        q = grad.copy()
        alphas = []
        for s, yv, rho in zip(reversed(s_hist), reversed(y_hist),
                              reversed(rho_hist)):
            a = rho * (s @ q)
            alphas.append(a)
            q -= a * yv
        if y_hist:
            gamma = (s_hist[-1] @ y_hist[-1]) / (y_hist[-1] @ y_hist[-1])
            q *= gamma
        for (s, yv, rho), a in zip(zip(s_hist, y_hist, rho_hist),
                                   reversed(alphas)):
            q += (a - rho * (yv @ q)) * s
        direction = -q
        slope = grad @ direction
        if slope >= 0:  # numerical breakdown; fall back to steepest descent
            direction = -grad
            slope = -gnorm * gnorm
            s_hist, y_hist, rho_hist = [], [], []
        step = 1.0
        for _ in range(40):
            cand = x + step * direction
            cand_loss, cand_grad = objective(cand)
            if cand_loss <= loss + 1e-4 * step * slope:
                break
            step *= 0.5
        else:
            return x, it, gnorm  # no descent step at float precision
        s = cand - x
        yv = cand_grad - grad
        sy = s @ yv
        if sy > 1e-10:  # curvature condition; skip degenerate pairs
            s_hist.append(s)
            y_hist.append(yv)
            rho_hist.append(1.0 / sy)
            if len(s_hist) > memory:
                s_hist.pop(0)
                y_hist.pop(0)
                rho_hist.pop(0)
        x, loss, grad = cand, cand_loss, cand_grad
        if not np.isfinite(loss):
            raise FitError("objective diverged to a non-finite loss")
    return x, max_iter, float(np.linalg.norm(grad))


def _unpack(theta, d):
    return theta[:d], theta[d]


# ---------------------------------------------------------------------------
# classifiers


def fit_ridge_classifier(X, y, alpha: float = 1.0,
                         schema_version: str = "", seed: int = 0,
                         overwrite_x: bool = False) -> ModelParams:
    """L2-regularized least squares on labels mapped to {-1, +1}."""
    if alpha <= 0:
        raise FitError("ridge requires alpha > 0 (the normal system may be "
                       "singular otherwise)")
    X = np.asarray(X)
    std = Standardizer.fit(X)
    Z = std.transform(X, overwrite=overwrite_x)
    t = np.where(np.asarray(y) > 0, 1.0, -1.0).astype(Z.dtype)
    # bias is unpenalized: solve on centered data, recover intercept
    zm = Z.mean(axis=0, dtype=np.float64)
    tm = t.mean(dtype=np.float64)
    if overwrite_x and Z is X:
        Zc = Z  # center the scratch matrix in place; no second copy
        Zc -= zm.astype(Z.dtype)
    else:
        Zc = Z - zm.astype(Z.dtype)
    A = (Zc.T @ Zc).astype(np.float64) + alpha * np.eye(Z.shape[1])
    w = np.linalg.solve(A, (Zc.T @ (t - Z.dtype.type(tm))).astype(np.float64))
    b = tm - zm @ w
    return ModelParams("ridge", schema_version, std, {"alpha": alpha}, seed,
                       w=w, b=float(b))


def logreg_objective(Z, y, C):
    """Mean log-loss plus ||w||^2 / (2 C n); returns an objective closure.

    Arithmetic runs in Z's dtype, so large float32 matrices stay float32.
    """
    n, d = Z.shape
    y = np.asarray(y, dtype=Z.dtype)

    def objective(theta):
        w, b = _unpack(theta, d)
        z = Z @ w.astype(Z.dtype) + Z.dtype.type(b)
        # stable log(1 + exp(-|z|)) formulation
        loss = float(np.mean(np.maximum(z, 0) - z * y + np.log1p(np.exp(-np.abs(z))),
                             dtype=np.float64))
        loss += (w @ w) / (2.0 * C * n)
        r = (_sigmoid(z) - y) / Z.dtype.type(n)
        grad = np.empty(d + 1)
        grad[:d] = (Z.T @ r).astype(np.float64) + w / (C * n)
        grad[d] = float(r.sum(dtype=np.float64))
        return loss, grad

    return objective


def fit_logistic_regression(X, y, C: float = 0.1, max_iter: int = 4000,
                            tol: float = 1e-4, schema_version: str = "",
                            seed: int = 0,
                            overwrite_x: bool = False) -> ModelParams:
    X = np.asarray(X)
    std = Standardizer.fit(X)
    Z = std.transform(X, overwrite=overwrite_x)
    obj = logreg_objective(Z, y, C)
    theta, n_iter, gnorm = lbfgs(obj, np.zeros(Z.shape[1] + 1), max_iter, tol)
    w, b = _unpack(theta, Z.shape[1])
    return ModelParams("logreg", schema_version, std,
                       {"C": C, "max_iter": max_iter, "tol": tol,
                        "n_iter": n_iter, "grad_norm": gnorm},
                       seed, w=w, b=float(b))


def svc_objective(Z, y, C):
    """Squared hinge plus ||w||^2 / (2 C n)."""
    n, d = Z.shape
    t = np.where(np.asarray(y) > 0, 1.0, -1.0).astype(Z.dtype)

    def objective(theta):
        w, b = _unpack(theta, d)
        margin = 1.0 - t * (Z @ w.astype(Z.dtype) + Z.dtype.type(b))
        active = np.maximum(margin, 0.0)
        loss = float(np.mean(active ** 2, dtype=np.float64)) + (w @ w) / (2.0 * C * n)
        r = (Z.dtype.type(-2.0 / n)) * t * active
        grad = np.empty(d + 1)
        grad[:d] = (Z.T @ r).astype(np.float64) + w / (C * n)
        grad[d] = float(r.sum(dtype=np.float64))
        return loss, grad

    return objective


def fit_linear_svc(X, y, C: float = 1.0, max_iter: int = 1000,
                   tol: float = 1e-4, schema_version: str = "",
                   seed: int = 0, overwrite_x: bool = False) -> ModelParams:
    X = np.asarray(X)
    std = Standardizer.fit(X)
    Z = std.transform(X, overwrite=overwrite_x)
    obj = svc_objective(Z, y, C)
    theta, n_iter, gnorm = lbfgs(obj, np.zeros(Z.shape[1] + 1), max_iter, tol)
    w, b = _unpack(theta, Z.shape[1])
    return ModelParams("svc", schema_version, std,
                       {"C": C, "max_iter": max_iter, "tol": tol,
                        "n_iter": n_iter, "grad_norm": gnorm},
                       seed, w=w, b=float(b))


# ---------------------------------------------------------------------------
# regressors


def fit_linear_regression(X, y, alpha: float = 1e-8,
                          schema_version: str = "", seed: int = 0,
                          overwrite_x: bool = False) -> ModelParams:
    """OLS via ridge with a tiny alpha for conditioning; clamped at eval."""
    X = np.asarray(X)
    std = Standardizer.fit(X)
    Z = std.transform(X, overwrite=overwrite_x)
    y = np.asarray(y, dtype=Z.dtype)
    zm = Z.mean(axis=0, dtype=np.float64)
    ym = float(y.mean(dtype=np.float64))
    if overwrite_x and Z is X:
        Zc = Z
        Zc -= zm.astype(Z.dtype)
    else:
        Zc = Z - zm.astype(Z.dtype)
    A = (Zc.T @ Zc).astype(np.float64) + alpha * np.eye(Z.shape[1])
    w = np.linalg.solve(A, (Zc.T @ (y - Z.dtype.type(ym))).astype(np.float64))
    b = ym - zm @ w
    return ModelParams("linreg", schema_version, std, {"alpha": alpha}, seed,
                       w=w, b=float(b))


def _glorot_layers(sizes, rng):
    layers = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(1.0 / fan_in)
        W = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        layers.append((W, np.zeros(fan_out)))
    return layers


def _mlp_forward(layers, Z):
    """Activations per layer; ReLU hidden, sigmoid output."""
    acts = [np.asarray(Z, dtype=np.float64)]
    for i, (W, b) in enumerate(layers):
        z = acts[-1] @ W + b
        if i < len(layers) - 1:
            acts.append(np.maximum(z, 0.0))
        else:
            acts.append(_sigmoid(z))
    return acts


def mlp_loss_and_grads(layers, Z, y):
    """MSE between sigmoid output and targets, with full backprop."""
    y = np.asarray(y, dtype=np.float64).reshape(-1, 1)
    acts = _mlp_forward(layers, Z)
    out = acts[-1]
    n = len(y)
    loss = float(np.mean((out - y) ** 2))
    delta = (2.0 / n) * (out - y) * out * (1.0 - out)
    grads = [None] * len(layers)
    for i in range(len(layers) - 1, -1, -1):
        W, _ = layers[i]
        grads[i] = (acts[i].T @ delta, delta.sum(axis=0))
        if i > 0:
            delta = (delta @ W.T) * (acts[i] > 0)
    return loss, grads


def fit_mlp(X, y, hidden=(32, 16), lr: float = 5e-2, epochs: int = 60,
            batch: int = 128, seed: int = 0,
            schema_version: str = "", overwrite_x: bool = False) -> ModelParams:
    X = np.asarray(X)
    std = Standardizer.fit(X)
    Z = std.transform(X, overwrite=overwrite_x)
    y = np.asarray(y, dtype=np.float64)
    rng = np.random.default_rng(seed)
    sizes = [Z.shape[1], *hidden, 1]
    layers = _glorot_layers(sizes, rng)
    n = len(y)
    initial_loss, _ = mlp_loss_and_grads(layers, Z[:min(n, 4096)],
                                         y[:min(n, 4096)])
    for epoch in range(epochs):
        order = rng.permutation(n)
        for lo in range(0, n, batch):
            idx = order[lo:lo + batch]
            loss, grads = mlp_loss_and_grads(layers, Z[idx], y[idx])
            if not np.isfinite(loss) or loss > 10.0 * max(initial_loss, 1.0):
                raise FitError(f"MLP diverged at epoch {epoch} "
                               f"(loss {loss:.3g}); try a smaller lr")
            layers = [(W - lr * gW, b - lr * gb)
                      for (W, b), (gW, gb) in zip(layers, grads)]
    return ModelParams("mlp", schema_version, std,
                       {"hidden": list(hidden), "lr": lr, "epochs": epochs,
                        "batch": batch},
                       seed, layers=layers)


_FIT_BY_FAMILY = {
    "ridge": fit_ridge_classifier,
    "logreg": fit_logistic_regression,
    "svc": fit_linear_svc,
    "linreg": fit_linear_regression,
    "mlp": fit_mlp,
}


def fit_model(family: str, X, y, hyper: dict | None = None,
              schema_version: str = "", seed: int = 0,
              overwrite_x: bool = False) -> ModelParams:
    if family not in _FIT_BY_FAMILY:
        raise ValueError(f"unknown model family {family!r}")
    hyper = dict(hyper or {})
    hyper.pop("n_iter", None)  # informational keys echoed by earlier fits
    hyper.pop("grad_norm", None)
    return _FIT_BY_FAMILY[family](X, y, schema_version=schema_version,
                                  seed=seed, overwrite_x=overwrite_x, **hyper)


# ---------------------------------------------------------------------------
# artifact IO (plain text, exact round trip via float repr)


def _floats(values) -> str:
    # repr of a Python float round-trips exactly; numpy scalar repr does not
    return " ".join(repr(float(v)) for v in values)


def save_model(params: ModelParams, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write("bpchess-model v1\n")
        f.write(f"family={params.family}\n")
        f.write(f"schema={params.schema_version}\n")
        f.write(f"seed={params.seed}\n")
        for k, v in sorted(params.hyper.items()):
            f.write(f"hyper.{k}={v!r}\n")
        f.write("mean=" + _floats(params.standardizer.mean) + "\n")
        f.write("scale=" + _floats(params.standardizer.scale) + "\n")
        if params.family == "mlp":
            f.write(f"layers={len(params.layers)}\n")
            for W, b in params.layers:
                f.write(f"shape={W.shape[0]} {W.shape[1]}\n")
                for row in W:
                    f.write(_floats(row) + "\n")
                f.write(_floats(b) + "\n")
        else:
            f.write(f"bias={params.b!r}\n")
            f.write("weights=" + _floats(params.w) + "\n")


def load_model(path) -> ModelParams:
    with open(path, encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines or lines[0] != "bpchess-model v1":
        raise ValueError(f"{path}: not a bpchess model artifact")
    kv = {}
    i = 1
    while i < len(lines) and "=" in lines[i] and not lines[i].startswith("shape="):
        k, v = lines[i].split("=", 1)
        kv[k] = v
        i += 1
        if k == "layers":
            break
    hyper = {}
    for k, v in kv.items():
        if k.startswith("hyper."):
            hyper[k[6:]] = eval(v)  # noqa: S307 - our own repr output
    std = Standardizer(np.array([float(x) for x in kv["mean"].split()]),
                       np.array([float(x) for x in kv["scale"].split()]))
    params = ModelParams(kv["family"], kv["schema"], std, hyper,
                         int(kv["seed"]))
    if kv["family"] == "mlp":
        layers = []
        for _ in range(int(kv["layers"])):
            rows, cols = (int(x) for x in lines[i].split("=")[1].split())
            i += 1
            W = np.array([[float(x) for x in lines[i + r].split()]
                          for r in range(rows)])
            i += rows
            b = np.array([float(x) for x in lines[i].split()])
            i += 1
            layers.append((W, b))
        params.layers = layers
    else:
        params.b = float(kv["bias"])
        params.w = np.array([float(x) for x in kv["weights"].split()])
    return params
