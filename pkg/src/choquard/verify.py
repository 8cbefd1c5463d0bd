"""Sampled checks of the functional inequalities behind the existence theory.

Each check draws random grid functions from per-sample seeds ``(seed, k)``,
so any witness can be regenerated from the report alone. Boundedness checks
use a stabilization rule: the supremum over the second half of the samples
must not exceed the supremum over the first half.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _reduce
from .energy import Problem
from .exponents import FieldError, FieldSet, OnePointField, critical_exponent, field_extrema
from .exponents import check_r_admissible
from .kernels import choquard_tables
from .mesh import Mesh
from .sampling import bump, random_function, sample_rng
from .vxnorm import luxemburg_norm, x0_norm

__all__ = [
    "VerifyError",
    "VerificationReport",
    "stabilized",
    "hls_ratio",
    "verify_hls",
    "verify_kernel_split",
    "verify_embedding",
    "geometry_scan",
]


class VerifyError(ValueError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


@dataclass
class VerificationReport:
    name: str
    samples: int
    worst: float
    passed: bool
    seed: Optional[int] = None
    witness_index: Optional[int] = None
    values: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def row(self) -> str:
        status = "pass" if self.passed else "FAIL"
        witness = "" if self.witness_index is None else f"seed={self.seed},index={self.witness_index}"
        extra = " ".join(f"{k}={v!r}" for k, v in self.details.items())
        return f"{self.name}\t{status}\t{self.samples}\t{self.worst!r}\t{witness}\t{extra}"

    def values_csv(self) -> str:
        lines = ["index,value"] + [f"{k},{v!r}" for k, v in enumerate(self.values)]
        return "\n".join(lines) + "\n"


TABLE_HEADER = "check\tstatus\tsamples\tworst\twitness\tdetails"


def stabilized(values: Sequence[float]) -> bool:
    """True when no new supremum appears in the second half of the samples."""
    v = np.asarray(values, dtype=float)
    if len(v) < 2 or not np.all(np.isfinite(v)):
        return False
    half = len(v) // 2
    return bool(v[half:].max() <= v[:half].max())


def _running_sup_report(name, ratios, seed, details) -> VerificationReport:
    ratios = [float(x) for x in ratios]
    if not ratios:
        return VerificationReport(name=name, samples=0, worst=0.0, passed=False, seed=seed, details=details)
    k = int(np.argmax(ratios))
    return VerificationReport(
        name=name,
        samples=len(ratios),
        worst=ratios[k],
        passed=stabilized(ratios),
        seed=seed,
        witness_index=k,
        values=ratios,
        details=details,
    )


def hls_ratio(u, fields: FieldSet, mesh: Mesh, q_lo: float, q_hi: float) -> float:
    """Choquard-type double sum of |u|^r over the sum of squared L^q+- norms of |u|^r."""
    u = np.asarray(u, dtype=float)
    if not np.any(u):
        return 0.0
    v = np.abs(u) ** fields.r(mesh.interior)
    K = choquard_tables(mesh, fields.mu).K
    lhs = _reduce.total(v * (K * v[None, :]).sum(axis=1))
    cv = mesh.cell_volume
    rhs = (_reduce.total(v**q_hi) * cv) ** (2 / q_hi) + (_reduce.total(v**q_lo) * cv) ** (2 / q_lo)
    return lhs / rhs


def verify_hls(fields: FieldSet, mesh: Mesh, samples: int = 200, seed: int = 7) -> VerificationReport:
    """Empirical constant of the HLS-type bound for variable exponents."""
    checks = check_r_admissible(fields.r, fields.q, fields.p, fields.s, mesh)
    bad = [c for c in checks if not c.passed and c.name.startswith("M:")]
    if bad:
        raise VerifyError(f"r is not admissible: {bad[0].name}", witness=bad[0].witness)
    q = field_extrema(fields.q, mesh)
    ratios = [
        hls_ratio(random_function(mesh, sample_rng(seed, k)), fields, mesh, q.lo, q.hi) for k in range(samples)
    ]
    return _running_sup_report("hls", ratios, seed, {"q-": q.lo, "q+": q.hi})


def verify_kernel_split(mu, mesh: Mesh, rtol: float = 1e-14) -> VerificationReport:
    """Pointwise |x-y|^-mu <= |x-y|^-mu+ + |x-y|^-mu- on every Omega x Omega pair."""
    ext = field_extrema(mu, mesh)
    I = mesh.interior
    d = np.sqrt(((I[:, None, :] - I[None, :, :]) ** 2).sum(axis=-1))
    off = ~np.eye(len(I), dtype=bool)
    d = d[off]
    m = mu(I[:, None, :], I[None, :, :])[off]
    lhs = d ** (-m)
    rhs = d ** (-ext.hi) + d ** (-ext.lo)
    excess = lhs - rhs * (1 + rtol)
    violations = int(np.sum(excess > 0))
    return VerificationReport(
        name="kernel_split",
        samples=int(d.size),
        worst=float(np.max(lhs / rhs)),
        passed=violations == 0,
        details={"violations": violations, "mu-": ext.lo, "mu+": ext.hi},
    )


def verify_embedding(gamma: OnePointField, fields: FieldSet, mesh: Mesh, samples: int = 200, seed: int = 7) -> VerificationReport:
    """Empirical constant C in ||u||_{L^gamma} <= C ||u||_X0."""
    X = mesh.interior
    g = gamma(X)
    try:
        ps = critical_exponent(fields.p, fields.s, X, mesh.N)
    except FieldError as exc:
        raise VerifyError(f"critical exponent undefined: {exc}", witness=exc.witness) from exc
    bad = np.flatnonzero((g <= 1) | (g >= ps))
    if bad.size:
        k = int(bad[0])
        raise VerifyError(
            f"gamma outside (1, p_s*) at {X[k].tolist()}: gamma={g[k]!r}, p_s*={ps[k]!r}",
            witness=X[k].tolist(),
        )
    ratios = []
    for k in range(samples):
        u = random_function(mesh, sample_rng(seed, k))
        nrm = x0_norm(u, fields.s, fields.p, mesh)
        if nrm == 0:
            continue
        ratios.append(luxemburg_norm(u, g, mesh) / nrm)
    return _running_sup_report("embedding", ratios, seed, {"gamma-": float(g.min()), "gamma+": float(g.max())})


def geometry_scan(
    lam: float,
    fields: FieldSet,
    mesh: Mesh,
    radii: Sequence[float],
    samples_per_radius: int = 20,
    seed: int = 7,
) -> VerificationReport:
    """Sampled minimum of J_lam on spheres ||u||_X0 = delta, plus a far negative point."""
    prob = Problem(fields, mesh)
    samples = [random_function(mesh, sample_rng(seed, k)) for k in range(samples_per_radius)]
    unit = [u / prob.x0_norm(u) for u in samples]
    mins = []
    witnesses = []
    for delta in radii:
        vals = [prob.total(delta * u, lam) for u in unit]
        k = int(np.argmin(vals))
        mins.append(float(vals[k]))
        witnesses.append(k)
    xi = bump(mesh)
    t = 1.0
    J_far = prob.total(xi, lam)
    for _ in range(60):
        if J_far < 0:
            break
        t *= 2.0
        J_far = prob.total(t * xi, lam)
    positive = [d for d, m in zip(radii, mins) if m > 0]
    best = int(np.argmax(mins))
    details = {
        "lambda": lam,
        "far_t": t,
        "far_J": J_far,
        "positive_radii": len(positive),
        "delta_best": float(radii[best]),
    }
    pos = [(d, m) for d, m in zip(radii, mins) if m > 0]
    if len(pos) >= 2:
        x = np.log([d for d, _ in pos])
        y = np.log([m for _, m in pos])
        details["small_radius_slope"] = float(np.polyfit(x[:3], y[:3], 1)[0]) if len(pos) >= 3 else float(
            (y[1] - y[0]) / (x[1] - x[0])
        )
    return VerificationReport(
        name="geometry",
        samples=len(radii) * samples_per_radius,
        worst=mins[best],
        passed=bool(positive) and J_far < 0,
        seed=seed,
        witness_index=witnesses[best],
        values=mins,
        details=details,
    )
