"""Generalized symmetric eigensolvers and spectrum bookkeeping.

The lumped mass matrix is diagonal, so the pencil A v = lambda M v reduces
exactly to the standard symmetric problem S y = lambda y with
S = M^{-1/2} A M^{-1/2}, y = M^{1/2} v.  The dense path hands S to LAPACK;
the Krylov path is a Lanczos iteration with full reorthogonalization and
deflation restarts (so repeated eigenvalues are found), optionally in
shift-inverted form for large problems.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    BeyondTruncation,
    MisalignedMeshes,
    NoConvergence,
    NotPositiveMass,
    TooLargeForDense,
)
from .metric_graph import DiscreteOperator

DENSE_THRESHOLD = 4000
DEFAULT_SEED = 20260826


@dataclass
class EigenPairs:
    """Eigenvalues with M-orthonormal eigenvectors, sorted ascending."""

    values: np.ndarray
    vectors: np.ndarray  # shape (n, k)
    M: np.ndarray

    def residuals(self, op: DiscreteOperator) -> np.ndarray:
        R = op.A @ self.vectors - (op.M[:, None] * self.vectors) * self.values[None, :]
        return np.linalg.norm(R, axis=0)


@dataclass(frozen=True)
class SpectrumEntry:
    value: float
    multiplicity: int
    tag: str = ""


@dataclass
class SpectrumList:
    """Sorted eigenvalues with multiplicities, analytic or numeric."""

    entries: list[SpectrumEntry]
    origin: str
    truncation: float
    pitch: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        vals = [e.value for e in self.entries]
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValueError("spectrum entries must be strictly increasing")
        if any(e.multiplicity < 1 for e in self.entries):
            raise ValueError("multiplicities must be >= 1")

    def values(self) -> np.ndarray:
        return np.array([e.value for e in self.entries])

    def total_multiplicity(self) -> int:
        return sum(e.multiplicity for e in self.entries)

    # -- serialization -------------------------------------------------------

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["eigenvalue", "multiplicity", "tag", "source"])
        for e in self.entries:
            w.writerow([repr(e.value), e.multiplicity, e.tag, self.origin])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, truncation: float = np.inf, pitch=None) -> "SpectrumList":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0] != ["eigenvalue", "multiplicity", "tag", "source"]:
            raise ValueError("bad spectrum CSV header")
        entries = [SpectrumEntry(float(r[0]), int(r[1]), r[2]) for r in rows[1:]]
        origin = rows[1][3] if len(rows) > 1 else "unknown"
        return cls(entries=entries, origin=origin, truncation=truncation, pitch=pitch)

    def to_json(self) -> str:
        return json.dumps(
            {
                "origin": self.origin,
                "truncation": self.truncation,
                "pitch": self.pitch,
                "meta": self.meta,
                "entries": [
                    {"value": repr(e.value), "multiplicity": e.multiplicity, "tag": e.tag}
                    for e in self.entries
                ],
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "SpectrumList":
        doc = json.loads(text)
        return cls(
            entries=[
                SpectrumEntry(float(d["value"]), d["multiplicity"], d["tag"])
                for d in doc["entries"]
            ],
            origin=doc["origin"],
            truncation=doc["truncation"],
            pitch=doc["pitch"],
            meta=doc.get("meta", {}),
        )


# -- solvers ----------------------------------------------------------------


def _standard_form(d: DiscreteOperator):
    if np.any(d.M <= 0):
        raise NotPositiveMass("mass diagonal must be positive")
    ms = 1.0 / np.sqrt(d.M)
    S = d.A.multiply(ms[:, None]).multiply(ms[None, :]).tocsr()
    return S, ms


def solve_dense(d: DiscreteOperator, k: int | None = None, threshold: int = DENSE_THRESHOLD) -> EigenPairs:
    """All (or k smallest) eigenpairs via LAPACK on M^{-1/2} A M^{-1/2}."""
    n = d.n
    if n > threshold:
        raise TooLargeForDense(f"{n} nodes exceeds dense threshold {threshold}")
    S, ms = _standard_form(d)
    w, Q = scipy.linalg.eigh(S.toarray())
    if k is not None:
        w, Q = w[:k], Q[:, :k]
    vecs = ms[:, None] * Q
    return EigenPairs(values=w, vectors=vecs, M=d.M)


def solve_lanczos(
    d: DiscreteOperator,
    k: int,
    tol: float = 1e-10,
    max_iter: int | None = None,
    seed: int = DEFAULT_SEED,
    shift_invert: bool | None = None,
    sigma: float = 1.0,
) -> EigenPairs:
    """k smallest eigenpairs by Lanczos with full reorthogonalization.

    Multiplicities are recovered by deflation restarts: after a batch of Ritz
    pairs converges, the iteration restarts with a fresh vector orthogonal to
    everything already found.  Shift-invert (default for n > 1500) factors
    S + sigma*I once and runs Lanczos on its inverse.
    """
    n = d.n
    if k > n:
        raise ValueError("k exceeds problem size")
    S, ms = _standard_form(d)
    if shift_invert is None:
        shift_invert = n > 1500
    if shift_invert:
        lu = spla.splu((S + sigma * sp.identity(n, format="csr")).tocsc())
        matvec = lu.solve
    else:
        matvec = lambda x: S @ x

    rng = np.random.default_rng(seed)
    if max_iter is None:
        max_iter = max(60 * k + 300, 12 * n, 2000)
    conv_vals: list[float] = []
    conv_vecs: list[np.ndarray] = []
    m_per_round = min(n, max(2 * k + 20, 40))
    total_iter = 0

    confirmed = False
    restart = None
    empty_rounds = 0
    while len(conv_vals) < k or not confirmed:
        if total_iter >= max_iter:
            raise NoConvergence(total_iter)
        Qc = np.column_stack(conv_vecs) if conv_vecs else np.zeros((n, 0))
        v = restart if restart is not None else rng.standard_normal(n)
        restart = None
        basis = []
        alphas, betas = [], []

        def orth(x):
            if Qc.shape[1]:
                x = x - Qc @ (Qc.T @ x)
            for b in basis:
                x = x - b * (b @ x)
            # second pass for numerical safety
            if Qc.shape[1]:
                x = x - Qc @ (Qc.T @ x)
            for b in basis:
                x = x - b * (b @ x)
            return x

        v = orth(v)
        nv = np.linalg.norm(v)
        if nv < 1e-13:
            continue
        v /= nv
        basis.append(v)
        steps = min(m_per_round, n - len(conv_vals))
        for _ in range(steps):
            total_iter += 1
            w = matvec(basis[-1])
            a = basis[-1] @ w
            alphas.append(a)
            w = orth(w)
            b = np.linalg.norm(w)
            if b < 1e-13:
                break
            betas.append(b)
            basis.append(w / b)
        mloc = len(alphas)
        T = np.diag(alphas)
        if betas:
            T += np.diag(betas[:mloc - 1], 1) + np.diag(betas[:mloc - 1], -1)
        theta, U = np.linalg.eigh(T)
        V = np.column_stack(basis[:mloc])
        # convert Ritz values back to pencil eigenvalues
        if shift_invert:
            order = np.argsort(-theta)  # largest theta = smallest lambda
        else:
            order = np.argsort(theta)
        # a restart may still carry an unfound copy of a repeated eigenvalue,
        # so once k values are in hand keep deflating until a fresh round
        # converges nothing below the current k-th value
        cutoff = (
            np.inf
            if len(conv_vals) < k
            else sorted(conv_vals)[k - 1] * (1 + 1e-8) + 1e-12
        )
        # deflation leakage puts a residual floor under the last copy of a
        # repeated eigenvalue; after two empty rounds accept looser candidates
        # and let the final Rayleigh-Ritz refinement polish them
        tol_eff = tol if empty_rounds < 2 else max(tol, 1e-6)
        got_any = False
        min_ritz = np.inf
        for idx in order:
            lam = 1.0 / theta[idx] - sigma if shift_invert else theta[idx]
            min_ritz = min(min_ritz, lam)
            if lam > cutoff:
                break
            y = V @ U[:, idx]
            res = np.linalg.norm(S @ y - lam * y)
            if res <= tol_eff * max(1.0, abs(lam)):
                y = orth_against(y, conv_vecs)
                ny = np.linalg.norm(y)
                if ny < 1e-8:
                    continue
                conv_vals.append(lam)
                conv_vecs.append(y / ny)
                got_any = True
                if len(conv_vals) >= k and not np.isfinite(cutoff):
                    break
        # even an unconverged Ritz value below the cutoff means the deflated
        # operator still has spectrum we need; only an empty round whose
        # smallest Ritz value clears the cutoff certifies completeness
        confirmed = len(conv_vals) >= k and not got_any and min_ritz > cutoff
        if not got_any and not confirmed:
            # nothing accepted but spectrum remains below the cutoff: warm
            # restart from the best Ritz vector and lengthen the next round
            restart = V @ U[:, order[0]]
            m_per_round = min(n, 2 * m_per_round)
        empty_rounds = 0 if got_any else empty_rounds + 1

    # final Rayleigh-Ritz pass over the collected block: restores mutual
    # orthogonality and gives Rayleigh-quotient accuracy (residual squared)
    # even for candidates accepted under the relaxed threshold
    Q, _ = np.linalg.qr(np.column_stack(conv_vecs))
    H = Q.T @ (S @ Q)
    w_all, Z = np.linalg.eigh(0.5 * (H + H.T))
    Y = Q @ Z[:, :k]
    vecs = ms[:, None] * Y
    return EigenPairs(values=w_all[:k], vectors=vecs, M=d.M)


def orth_against(y: np.ndarray, basis: list[np.ndarray]) -> np.ndarray:
    for b in basis:
        y = y - b * (b @ y)
    return y


def solve(d: DiscreteOperator, k: int | None = None, threshold: int = DENSE_THRESHOLD, **kw) -> EigenPairs:
    """Dense below the size threshold, shift-invert Lanczos above."""
    if d.n <= threshold:
        return solve_dense(d, k, threshold=threshold)
    if k is None:
        raise TooLargeForDense("full spectrum of a large pencil; pass k")
    return solve_lanczos(d, k, shift_invert=True, **kw)


def solve_below(d: DiscreteOperator, lam_max: float, threshold: int = DENSE_THRESHOLD, **kw) -> EigenPairs:
    """All eigenpairs with eigenvalue <= lam_max."""
    if d.n <= threshold:
        pairs = solve_dense(d, threshold=threshold)
        keep = pairs.values <= lam_max * (1 + 1e-12)
        return EigenPairs(pairs.values[keep], pairs.vectors[:, keep], d.M)
    k = 8
    while True:
        k = min(2 * k, d.n)
        pairs = solve_lanczos(d, k, **kw)
        if pairs.values[-1] > lam_max or k == d.n:
            keep = pairs.values <= lam_max * (1 + 1e-12)
            return EigenPairs(pairs.values[keep], pairs.vectors[:, keep], d.M)


# -- bookkeeping --------------------------------------------------------------


def cluster(
    eigs,
    rel_tol: float = 1e-7,
    origin: str = "numeric",
    truncation: float = np.inf,
    pitch: float | None = None,
    tags=None,
) -> SpectrumList:
    """Gap-based multiplicity clustering of a sorted eigenvalue array.

    ``tags`` optionally assigns a label per raw eigenvalue; a cluster's tag
    lists the distinct labels with their counts.
    """
    eigs = np.asarray(eigs, dtype=float)
    if np.any(np.diff(eigs) < 0):
        raise ValueError("input eigenvalues must be sorted")
    entries = []
    i = 0
    n = len(eigs)
    while i < n:
        j = i + 1
        while j < n and eigs[j] - eigs[j - 1] <= rel_tol * max(1.0, abs(eigs[j])):
            j += 1
        val = float(np.mean(eigs[i:j]))
        if tags is not None:
            labels = {}
            for t in tags[i:j]:
                labels[t] = labels.get(t, 0) + 1
            tag = ";".join(f"{t}x{c}" for t, c in sorted(labels.items()))
        else:
            tag = ""
        entries.append(SpectrumEntry(val, j - i, tag))
        i = j
    return SpectrumList(entries=entries, origin=origin, truncation=truncation, pitch=pitch)


@dataclass
class NestingReport:
    unmatched_lower: list
    surplus: list
    multiplicity_ok: bool
    max_deviation: float

    @property
    def ok(self) -> bool:
        return not self.unmatched_lower and self.multiplicity_ok

    def to_dict(self):
        return {
            "unmatched_lower": self.unmatched_lower,
            "surplus": self.surplus,
            "multiplicity_ok": self.multiplicity_ok,
            "max_deviation": self.max_deviation,
            "pass": self.ok,
        }


def verify_nesting(lower: SpectrumList, upper: SpectrumList, tol: float = 1e-9) -> NestingReport:
    """Check sigma(lower) subset-of sigma(upper) with multiplicity growth.

    Both lists must be numeric at the same pitch (the discrete nesting is
    exact only for aligned meshes).
    """
    if lower.pitch is not None and upper.pitch is not None:
        if abs(lower.pitch - upper.pitch) > 1e-12 * max(lower.pitch, upper.pitch):
            raise MisalignedMeshes(f"pitches {lower.pitch} vs {upper.pitch}")
    unmatched, surplus = [], []
    mult_ok = True
    max_dev = 0.0
    used = [False] * len(upper.entries)
    for le in lower.entries:
        best, best_dev = None, None
        for j, ue in enumerate(upper.entries):
            dev = abs(ue.value - le.value)
            if dev <= tol * max(1.0, abs(le.value)) and (best_dev is None or dev < best_dev):
                best, best_dev = j, dev
        if best is None:
            unmatched.append(le.value)
        else:
            used[best] = True
            max_dev = max(max_dev, best_dev / max(1.0, abs(le.value)))
            if upper.entries[best].multiplicity < le.multiplicity:
                mult_ok = False
    for j, ue in enumerate(upper.entries):
        if not used[j]:
            surplus.append(ue.value)
    return NestingReport(unmatched, surplus, mult_ok, max_dev)


def counting_function(s: SpectrumList, lam: float) -> int:
    """Eigenvalue counting function N(lambda), multiplicities included."""
    if lam > s.truncation * (1 + 1e-12):
        raise BeyondTruncation(f"lambda={lam} beyond truncation {s.truncation}")
    return int(sum(e.multiplicity for e in s.entries if e.value <= lam * (1 + 1e-12)))


@dataclass
class FDModel:
    """Second-order finite-difference error model: relative error of an
    eigenvalue lambda at pitch h is bounded by constant * lambda * h**2."""

    pitch: float
    constant: float = 10.0

    def rel_tol(self, lam: float) -> float:
        # absolute floor covers roundoff on near-zero modes
        return max(self.constant * abs(lam) * self.pitch**2, 1e-9)


@dataclass
class CompareReport:
    matched: list
    unmatched_numeric: list
    unmatched_analytic: list
    max_rel_deviation: float
    convergence_order: float | None = None

    @property
    def ok(self) -> bool:
        return not self.unmatched_numeric and not self.unmatched_analytic

    def to_dict(self):
        return {
            "matched": self.matched,
            "unmatched_numeric": self.unmatched_numeric,
            "unmatched_analytic": self.unmatched_analytic,
            "max_rel_deviation": self.max_rel_deviation,
            "convergence_order": self.convergence_order,
            "pass": self.ok,
        }


def compare_spectra(
    numeric: SpectrumList,
    analytic: SpectrumList,
    model: FDModel,
    coverage_max: float | None = None,
    numeric_coarse: SpectrumList | None = None,
    skip_zero: bool = True,
) -> CompareReport:
    """Match numeric eigenvalues against an analytic list with FD-aware
    tolerance.

    Every numeric value must be within model.rel_tol of some analytic value;
    every analytic value <= coverage_max must be hit.  A numeric zero mode is
    skipped when the analytic list omits it.  When a coarser-pitch list is
    given, the observed convergence order (median over matched values) is
    reported.
    """
    avals = analytic.values()
    has_zero = len(avals) and abs(avals[0]) < 1e-12
    matched, unmatched_numeric = [], []
    max_dev = 0.0
    hit = np.zeros(len(avals), dtype=bool)
    for e in numeric.entries:
        if skip_zero and not has_zero and abs(e.value) <= 1e-9:
            continue
        if len(avals) == 0:
            unmatched_numeric.append(e.value)
            continue
        j = int(np.argmin(np.abs(avals - e.value)))
        dev = abs(avals[j] - e.value) / max(1.0, abs(avals[j]))
        if dev <= model.rel_tol(avals[j]):
            hit[j] = True
            max_dev = max(max_dev, dev)
            matched.append({"numeric": e.value, "analytic": float(avals[j]), "rel_dev": dev})
        else:
            unmatched_numeric.append(e.value)
    unmatched_analytic = []
    if coverage_max is not None:
        for j, a in enumerate(avals):
            if a <= coverage_max and not hit[j] and (a > 1e-12 or not skip_zero):
                unmatched_analytic.append(float(a))
    order = None
    if numeric_coarse is not None:
        cvals = numeric_coarse.values()
        orders = []
        for m in matched:
            a = m["analytic"]
            if abs(a) < 1e-12 or len(cvals) == 0:
                continue
            jc = int(np.argmin(np.abs(cvals - a)))
            ec = abs(cvals[jc] - a)
            ef = abs(m["numeric"] - a)
            if ef > 1e-13 * abs(a) and ec > ef:
                orders.append(np.log2(ec / ef))
        if orders:
            order = float(np.median(orders))
    return CompareReport(matched, unmatched_numeric, unmatched_analytic, max_dev, order)


def richardson(fine: np.ndarray, coarse: np.ndarray, order: int = 2) -> np.ndarray:
    """Richardson extrapolation of index-matched eigenvalue lists computed at
    pitches h (coarse) and h/2 (fine)."""
    m = min(len(fine), len(coarse))
    f, c = np.asarray(fine[:m]), np.asarray(coarse[:m])
    w = 2.0**order
    return (w * f - c) / (w - 1.0)
