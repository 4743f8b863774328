"""Linear mixed models for panel SCR data.

Fits ``y = X beta + Z u + eps`` with independent per-participant random
slopes (diagonal random-effect covariance) by profiled restricted maximum
likelihood, and renders result tables in the fixed/random, beta/sigma,
t-value layout with reference levels shown as "--".
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
import yaml
from scipy.optimize import minimize


class LmmError(ValueError):
    """Model specification or fitting failure."""


@dataclass(frozen=True)
class FactorSpec:
    """Ordered levels of one categorical factor with its reference level."""

    name: str
    levels: tuple
    reference: str

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(self.levels))
        if self.reference not in self.levels:
            raise LmmError(
                f"reference {self.reference!r} not among levels of {self.name}")
        if len(set(self.levels)) != len(self.levels):
            raise LmmError(f"duplicate levels in factor {self.name}")

    @property
    def nonreference(self) -> tuple:
        return tuple(l for l in self.levels if l != self.reference)


@dataclass
class PanelDataset:
    """Long-format panel: one row per observation.

    ``frame`` must hold ``participant_id``, ``response``, and one column
    per factor.
    """

    frame: pd.DataFrame
    factors: list[FactorSpec]

    def __post_init__(self):
        needed = {"participant_id", "response"} | {f.name for f in self.factors}
        missing = needed - set(self.frame.columns)
        if missing:
            raise LmmError(f"dataset missing columns {sorted(missing)}")
        for f in self.factors:
            seen = set(self.frame[f.name].dropna().unique())
            unknown = seen - set(f.levels)
            if unknown:
                raise LmmError(
                    f"factor {f.name}: levels {sorted(unknown)} not in spec")


@dataclass(frozen=True)
class LmmSpec:
    """Which factors enter as fixed effects and which of those also get
    per-participant random slopes."""

    fixed: tuple
    random: tuple = ()
    random_intercept: bool = False

    def __post_init__(self):
        object.__setattr__(self, "fixed", tuple(self.fixed))
        object.__setattr__(self, "random", tuple(self.random))
        extra = set(self.random) - set(self.fixed)
        if extra:
            raise LmmError(f"random terms not among fixed terms: {sorted(extra)}")


@dataclass
class LmmFit:
    """Fitted mixed model."""

    beta: np.ndarray
    beta_names: list[str]
    se_beta: np.ndarray
    t_fixed: np.ndarray
    sigma_u: np.ndarray
    sigma_u_names: list[str]
    se_sigma_u: np.ndarray
    t_random: np.ndarray
    sigma_e: float
    loglik: float
    n_obs: int
    n_participants: int
    n_dropped: int = 0
    converged: bool = True
    boundary: bool = False
    unidentifiable: bool = False
    objective_trace: list = field(default_factory=list)


def build_design(dataset: PanelDataset, spec: LmmSpec):
    """Design matrices for the model.

    Returns ``(X, Z, y, groups, x_names, z_names, n_dropped)``: X with an
    intercept column and reference-omitted dummies; Z holding the random
    slope columns (plus an intercept column if requested); groups mapping
    each row to its participant index. Rows with missing factor values are
    dropped listwise.
    """
    by_name = {f.name: f for f in dataset.factors}
    for name in spec.fixed:
        if name not in by_name:
            raise LmmError(f"factor {name} not in dataset")
    used = ["participant_id", "response"] + list(spec.fixed)
    df = dataset.frame[used]
    complete = df.dropna()
    n_dropped = len(df) - len(complete)
    if complete.empty:
        raise LmmError("no complete rows")

    x_cols = [np.ones(len(complete))]
    x_names = ["(Intercept)"]
    z_cols, z_names = [], []
    if spec.random_intercept:
        z_cols.append(np.ones(len(complete)))
        z_names.append("(Intercept)")
    for name in spec.fixed:
        f = by_name[name]
        for level in f.nonreference:
            col = (complete[name] == level).to_numpy(float)
            x_cols.append(col)
            x_names.append(f"{name}: {level}")
            if name in spec.random:
                z_cols.append(col)
                z_names.append(f"{name}: {level}")
    x = np.column_stack(x_cols)
    z = np.column_stack(z_cols) if z_cols else np.empty((len(complete), 0))
    y = complete["response"].to_numpy(float)
    pids = complete["participant_id"].to_numpy()
    _, groups = np.unique(pids, return_inverse=True)
    return x, z, y, groups, x_names, z_names, n_dropped


def _check_collinearity(x: np.ndarray, names: list[str]) -> None:
    from scipy.linalg import qr
    _, r, piv = qr(x, mode="economic", pivoting=True)
    d = np.abs(np.diag(r))
    tol = d.max() * max(x.shape) * np.finfo(float).eps
    bad = [names[piv[i]] for i in range(len(d)) if d[i] < tol]
    if x.shape[1] > len(d):
        bad += [names[p] for p in piv[len(d):]]
    if bad:
        raise LmmError(f"design matrix singular; collinear columns: {bad}")


def _profile_pieces(x, z, y, groups, theta):
    """Per-participant accumulation of the profiled REML pieces for
    variance ratios ``theta`` (sigma_u^2 / sigma_e^2 per random column).

    Participants with the same group size are stacked and handled with one
    batched Cholesky; the optimizer calls this dozens of times per fit.
    """
    p = x.shape[1]
    xtvx = np.zeros((p, p))
    xtvy = np.zeros(p)
    ytvy = 0.0
    logdet = 0.0
    uniq, inv = np.unique(groups, return_inverse=True)
    order = np.argsort(inv, kind="stable")
    counts = np.bincount(inv, minlength=uniq.size)
    starts = np.concatenate([[0], np.cumsum(counts)])
    by_size: dict[int, list[np.ndarray]] = {}
    for gi in range(uniq.size):
        sel = order[starts[gi]:starts[gi + 1]]
        by_size.setdefault(int(counts[gi]), []).append(sel)
    for ni, sels in by_size.items():
        idx = np.stack(sels)                          # (m, ni)
        xi, yi, zi = x[idx], y[idx], z[idx]
        v0 = np.broadcast_to(np.eye(ni), (idx.shape[0], ni, ni)).copy()
        if z.shape[1]:
            v0 += (zi * theta) @ np.transpose(zi, (0, 2, 1))
        try:
            c = np.linalg.cholesky(v0)
        except np.linalg.LinAlgError:
            raise LmmError("non-positive-definite within-participant covariance")
        logdet += 2.0 * float(
            np.log(np.diagonal(c, axis1=1, axis2=2)).sum())
        sx = np.linalg.solve(c, xi)
        sy = np.linalg.solve(c, yi[..., None])[..., 0]
        xtvx += np.einsum("mij,mik->jk", sx, sx)
        xtvy += np.einsum("mij,mi->j", sx, sy)
        ytvy += float((sy * sy).sum())
    return xtvx, xtvy, ytvy, logdet


def _reml_deviance(x, z, y, groups, theta):
    n, p = x.shape
    xtvx, xtvy, ytvy, logdet = _profile_pieces(x, z, y, groups, theta)
    beta = np.linalg.solve(xtvx, xtvy)
    rss = ytvy - beta @ xtvy
    if rss <= 0:
        rss = 1e-12
    sigma2_e = rss / (n - p)
    sign, logdet_xtvx = np.linalg.slogdet(xtvx)
    if sign <= 0:
        raise LmmError("singular profiled design")
    dev = (n - p) * np.log(sigma2_e) + logdet + logdet_xtvx
    return dev, beta, sigma2_e, xtvx


def _reml_loglik_unprofiled(x, z, y, groups, sigma_u, sigma_e):
    """Restricted log-likelihood at explicit standard deviations, used for
    the observed-information standard errors of the variance parameters."""
    n, p = x.shape
    theta = (sigma_u / sigma_e) ** 2
    xtvx, xtvy, ytvy, logdet0 = _profile_pieces(x, z, y, groups, theta)
    beta = np.linalg.solve(xtvx, xtvy)
    rss = ytvy - beta @ xtvy
    s2 = sigma_e ** 2
    _, logdet_xtvx = np.linalg.slogdet(xtvx / s2)
    # The log|X' V^-1 X| term is the REML correction; constants that do
    # not involve the parameters are dropped.
    ll = -0.5 * (n * np.log(2 * np.pi * s2) + logdet0 + rss / s2
                 + logdet_xtvx)
    return ll


def fit_reml(x: np.ndarray, z: np.ndarray, y: np.ndarray,
             groups: np.ndarray, x_names: list[str] | None = None,
             z_names: list[str] | None = None, tol: float = 1e-8,
             n_dropped: int = 0,
             fixed_theta: np.ndarray | None = None) -> LmmFit:
    """Profiled REML fit with diagonal random-effect covariance.

    Variance ratios are optimized by Nelder-Mead in log coordinates (beta
    and the residual variance are profiled out); fixed-effect t values come
    from the GLS covariance at the optimum, random-effect t values from the
    observed information of the restricted likelihood.
    """
    x = np.asarray(x, float)
    z = np.asarray(z, float)
    y = np.asarray(y, float)
    n, p = x.shape
    r = z.shape[1]
    if x_names is None:
        x_names = [f"x{j}" for j in range(p)]
    if z_names is None:
        z_names = [f"z{j}" for j in range(r)]
    if n <= p:
        raise LmmError(f"need more observations ({n}) than fixed effects ({p})")
    uniq = np.unique(groups)
    if uniq.size < 2:
        raise LmmError("need at least 2 participants")
    _check_collinearity(x, x_names)

    counts = np.array([(groups == g).sum() for g in uniq])
    unidentifiable = False
    if r > 0 and counts.max() == 1:
        unidentifiable = True
        warnings.warn("one observation per participant: random-effect and "
                      "residual variances are jointly unidentifiable")

    trace: list[float] = []

    if r == 0:
        dev, beta, sigma2_e, xtvx = _reml_deviance(x, z, y, groups, np.empty(0))
        theta_hat = np.empty(0)
        converged = True
    elif fixed_theta is not None:
        # evaluation at a known variance ratio, no optimization
        theta_hat = np.asarray(fixed_theta, float)
        converged = True
        dev, beta, sigma2_e, xtvx = _reml_deviance(x, z, y, groups, theta_hat)
    else:
        def objective(log_theta):
            theta = np.exp(log_theta)
            try:
                dev, _, _, _ = _reml_deviance(x, z, y, groups, theta)
            except LmmError:
                return np.inf
            trace.append(dev if not trace else min(trace[-1], dev))
            return dev

        x0 = np.zeros(r)
        res = minimize(objective, x0, method="Nelder-Mead",
                       options={"xatol": tol, "fatol": tol,
                                "maxiter": 400 * max(r, 1)})
        theta_hat = np.exp(res.x)
        converged = bool(res.success)
        dev, beta, sigma2_e, xtvx = _reml_deviance(x, z, y, groups, theta_hat)

    sigma_e = float(np.sqrt(sigma2_e))
    sigma_u = sigma_e * np.sqrt(theta_hat)
    boundary = bool(np.any(sigma_u < 1e-6 * max(sigma_e, 1e-12)))

    cov_beta = np.linalg.inv(xtvx) * sigma2_e
    se_beta = np.sqrt(np.diag(cov_beta))
    t_fixed = beta / se_beta

    # Observed-information SEs for (sigma_u, sigma_e) by central-difference
    # Hessian of the restricted log-likelihood.
    se_sigma_u = np.full(r, np.nan)
    t_random = np.full(r, np.nan)
    if r > 0 and not unidentifiable:
        params = np.concatenate([sigma_u, [sigma_e]])
        scale = np.maximum(np.abs(params), 1e-3 * sigma_e)
        h = 1e-4 * scale

        def ll_at(q):
            su = np.maximum(q[:r], 1e-12)
            se_ = max(q[r], 1e-12)
            return _reml_loglik_unprofiled(x, z, y, groups, su, se_)

        m = r + 1
        hess = np.zeros((m, m))
        f0 = ll_at(params)
        for i in range(m):
            for j in range(i, m):
                ei = np.zeros(m); ei[i] = h[i]
                ej = np.zeros(m); ej[j] = h[j]
                if i == j:
                    val = (ll_at(params + ei) - 2 * f0 + ll_at(params - ei)) / h[i] ** 2
                else:
                    val = (ll_at(params + ei + ej) - ll_at(params + ei - ej)
                           - ll_at(params - ei + ej) + ll_at(params - ei - ej)
                           ) / (4 * h[i] * h[j])
                hess[i, j] = hess[j, i] = val
        info = -hess
        try:
            cov = np.linalg.inv(info)
            d = np.diag(cov)[:r]
            with np.errstate(invalid="ignore"):
                se_sigma_u = np.where(d > 0, np.sqrt(np.abs(d)), np.nan)
            t_random = sigma_u / se_sigma_u
        except np.linalg.LinAlgError:
            pass

    loglik = -0.5 * dev
    return LmmFit(beta=beta, beta_names=list(x_names), se_beta=se_beta,
                  t_fixed=t_fixed, sigma_u=sigma_u,
                  sigma_u_names=list(z_names), se_sigma_u=se_sigma_u,
                  t_random=t_random, sigma_e=sigma_e, loglik=loglik,
                  n_obs=n, n_participants=int(uniq.size),
                  n_dropped=n_dropped, converged=converged,
                  boundary=boundary, unidentifiable=unidentifiable,
                  objective_trace=trace)


def fit_lmm(dataset: PanelDataset, spec: LmmSpec, **kwargs) -> LmmFit:
    x, z, y, groups, x_names, z_names, n_dropped = build_design(dataset, spec)
    return fit_reml(x, z, y, groups, x_names, z_names,
                    n_dropped=n_dropped, **kwargs)


# ---------------------------------------------------------------------------
# Reporting


def emit_table(fit: LmmFit, dataset: PanelDataset, spec: LmmSpec) -> pd.DataFrame:
    """Result table: one row per factor level, reference levels as "--"."""
    by_name = {f.name: f for f in dataset.factors}
    sigma = dict(zip(fit.sigma_u_names, fit.sigma_u))
    tsig = dict(zip(fit.sigma_u_names, fit.t_random))
    beta = dict(zip(fit.beta_names, fit.beta))
    tfix = dict(zip(fit.beta_names, fit.t_fixed))

    def fmt(v):
        return "--" if v is None else f"{v:.2f}"

    rows = [{"term": "(Intercept)", "fixed_beta": fmt(beta["(Intercept)"]),
             "t_value": fmt(tfix["(Intercept)"]),
             "random_sigma": fmt(sigma.get("(Intercept)")),
             "t_value_random": fmt(tsig.get("(Intercept)"))}]
    for name in spec.fixed:
        f = by_name[name]
        rows.append({"term": f"[{name}]", "fixed_beta": "", "t_value": "",
                     "random_sigma": "", "t_value_random": ""})
        for level in f.levels:
            key = f"{name}: {level}"
            if level == f.reference:
                rows.append({"term": level, "fixed_beta": "--",
                             "t_value": "--", "random_sigma": "--",
                             "t_value_random": "--"})
            else:
                rows.append({"term": level,
                             "fixed_beta": fmt(beta.get(key)),
                             "t_value": fmt(tfix.get(key)),
                             "random_sigma": fmt(sigma.get(key)),
                             "t_value_random": fmt(tsig.get(key))})
    rows.append({"term": "Number of participants",
                 "fixed_beta": str(fit.n_participants), "t_value": "",
                 "random_sigma": "", "t_value_random": ""})
    rows.append({"term": "Number of observations",
                 "fixed_beta": str(fit.n_obs), "t_value": "",
                 "random_sigma": "", "t_value_random": ""})
    return pd.DataFrame(rows, columns=["term", "fixed_beta", "t_value",
                                       "random_sigma", "t_value_random"])


def render_table(table: pd.DataFrame, title: str) -> str:
    widths = {c: max(len(c), table[c].astype(str).str.len().max())
              for c in table.columns}
    header = " | ".join(c.ljust(widths[c]) for c in table.columns)
    sep = "-+-".join("-" * widths[c] for c in table.columns)
    lines = [title, "=" * len(header), header, sep]
    for _, row in table.iterrows():
        lines.append(" | ".join(str(row[c]).ljust(widths[c])
                                for c in table.columns))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Model spec files


def load_model_spec(path) -> tuple[list[FactorSpec], LmmSpec]:
    """Structured model file: response, factors with levels and reference,
    and the random-term subset."""
    with open(path, encoding="utf-8") as f:
        doc = yaml.safe_load(f)
    factors = [FactorSpec(name=d["name"], levels=tuple(d["levels"]),
                          reference=d["reference"])
               for d in doc["factors"]]
    spec = LmmSpec(fixed=tuple(doc.get("fixed", [f.name for f in factors])),
                   random=tuple(doc.get("random", ())),
                   random_intercept=bool(doc.get("random_intercept", False)))
    return factors, spec
