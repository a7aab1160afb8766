"""Convergence diagnostics on retained draws: split-R-hat, autocorrelation
based effective sample size, and trace export."""

from dataclasses import dataclass, field
import csv

import numpy as np

RHAT_THRESHOLD = 1.01
ESS_INFLATION_CAP = 1.5  # ess never reported above cap * total draws


def _split_halves(chains: np.ndarray) -> np.ndarray:
    """(C, D) draws -> (2C, D//2) half-chains; a trailing odd draw is
    dropped."""

    chains = np.asarray(chains, dtype=float)
    if chains.ndim != 2:
        raise ValueError("chains must be a (chains, draws) matrix")
    C, D = chains.shape
    if C < 2 or D < 4:
        raise ValueError("need at least 2 chains of at least 4 draws")
    half = D // 2
    return np.concatenate([chains[:, :half], chains[:, half:2 * half]], axis=0)


def split_rhat(chains) -> float:
    """Potential scale reduction on split half-chains: sqrt(V_hat / W) with
    W the mean within-chain variance and V_hat the weighted total-variance
    estimate. Zero-variance input returns exactly 1.0 (degenerate case;
    diagnose() flags it)."""

    halves = _split_halves(chains)
    m, n = halves.shape
    within = halves.var(axis=1, ddof=1)
    W = within.mean()
    if W == 0.0:
        return 1.0
    means = halves.mean(axis=1)
    B = n * means.var(ddof=1)
    v_hat = (n - 1) / n * W + B / n
    return float(np.sqrt(v_hat / W))


def _autocov_fft(x: np.ndarray) -> np.ndarray:
    """Biased (divide by n) autocovariance of one centered sequence."""

    n = x.shape[0]
    x = x - x.mean()
    size = 1
    while size < 2 * n:
        size <<= 1
    f = np.fft.rfft(x, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:n].real
    return acov / n


def effective_sample_size(chains) -> float:
    """Autocorrelation-sum ESS on split half-chains with Geyer's
    initial-positive and initial-monotone truncation. Degenerate
    (zero-variance) input returns NaN."""

    halves = _split_halves(chains)
    m, n = halves.shape
    within = halves.var(axis=1, ddof=1)
    W = within.mean()
    if W == 0.0:
        return float("nan")
    means = halves.mean(axis=1)
    v_hat = (n - 1) / n * W + means.var(ddof=1)
    acov = np.stack([_autocov_fft(halves[c]) for c in range(m)])
    mean_acov = acov.mean(axis=0)

    rho = np.zeros(n)
    rho[0] = 1.0
    # Geyer initial-positive: advance in pairs while the pair sum stays positive
    rho_even = 1.0
    rho_odd = 1.0 - (W - mean_acov[1]) / v_hat
    rho[1] = rho_odd
    t = 1
    while t < n - 3 and (rho_even + rho_odd) > 0.0:
        rho_even = 1.0 - (W - mean_acov[t + 1]) / v_hat
        rho_odd = 1.0 - (W - mean_acov[t + 2]) / v_hat
        if rho_even + rho_odd >= 0.0:
            rho[t + 1] = rho_even
            rho[t + 2] = rho_odd
        t += 2
    max_t = t - 2
    if rho_even > 0.0:
        rho[max_t + 1] = rho_even
    # initial-monotone: pair sums must not increase
    t = 1
    while t <= max_t - 2:
        if rho[t + 1] + rho[t + 2] > rho[t - 1] + rho[t]:
            rho[t + 1] = (rho[t - 1] + rho[t]) / 2.0
            rho[t + 2] = rho[t + 1]
        t += 2
    total = m * n
    tau = -1.0 + 2.0 * float(rho[:max_t + 2].sum())
    tau = max(tau, 1.0 / ESS_INFLATION_CAP)  # enforces the reporting cap below
    return float(total / tau)


@dataclass
class DiagnosticsReport:
    """Per monitored scalar: rhat, ess, and flags for degenerate inputs or
    rhat above the threshold."""

    names: list
    rhat: dict
    ess: dict
    flagged: list = field(default_factory=list)
    degenerate: list = field(default_factory=list)
    threshold: float = RHAT_THRESHOLD

    @property
    def max_rhat(self) -> float:
        finite = [v for v in self.rhat.values() if np.isfinite(v)]
        return max(finite) if finite else float("nan")

    @property
    def ok(self) -> bool:
        return not self.flagged

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "max_rhat": self.max_rhat,
            "flagged": list(self.flagged),
            "degenerate": list(self.degenerate),
            "parameters": {
                name: {"rhat": self.rhat[name], "ess": self.ess[name]}
                for name in self.names
            },
        }


def diagnose(draws, names=None, threshold: float = RHAT_THRESHOLD) -> DiagnosticsReport:
    """Run split-R-hat and ESS on every monitored scalar of a PosteriorDraws."""

    names = list(names) if names is not None else draws.names()
    rhat = {}
    ess = {}
    flagged = []
    degenerate = []
    for name in names:
        c = draws.extract(name)
        if np.ptp(c) == 0.0:
            degenerate.append(name)
            rhat[name] = 1.0
            ess[name] = float("nan")
            continue
        rhat[name] = split_rhat(c)
        ess[name] = effective_sample_size(c)
        if rhat[name] > threshold:
            flagged.append(name)
    return DiagnosticsReport(
        names=names, rhat=rhat, ess=ess,
        flagged=flagged, degenerate=degenerate, threshold=threshold,
    )


def export_traces(draws, names, path) -> None:
    """Write retained draws in long format (chain, iteration, name, value)
    for external plotting. Unknown names raise before anything is written."""

    names = list(names)
    columns = [draws.extract(name) for name in names]  # validates names
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["chain", "iteration", "name", "value"])
        for name, mat in zip(names, columns):
            C, D = mat.shape
            for c in range(C):
                col = mat[c]
                for d in range(D):
                    w.writerow([c, d, name, f"{col[d]:.17g}"])
