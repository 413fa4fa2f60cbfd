"""Exponential-length estimators: the exact scalar min-max formula,
branch-based lower bounds, path-length machinery, the constructive
determinant-1 upper-bound path, and the principal-log geodesic oracle.

Unit conventions: exact angle functions are PiecewiseLinearFn's holding the
coefficient of pi (so the value Fraction(3, 2) means 3pi/2); sampled angle
data is in radians. Every public result is a certified bound, never a point
value, except where an exact formula applies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .config import DEFAULT_TOLERANCES, Tolerances
from .errors import CommutatorError, FlavorError, SpectralCollisionError, WindowError
from .funalg import EigenvalueListField, PiecewiseLinearFn
from .numerics import (
    TWO_PI,
    SampledMatrixField,
    circular_gaps,
    lift_angle_array,
    match_step,
    normal_unitary_eig,
    operator_norm,
)

INF = math.inf


@dataclass(frozen=True)
class CelBound:
    """A certified lower/upper sandwich for an exponential length.

    lower/upper are radians; *_pi carry the exact coefficient of pi where
    the computation was exact. epsilon_report aggregates jitter and
    residual slack already included in the bound values.
    """

    lower: float = 0.0
    upper: float = INF
    lower_method: str = "trivial"
    upper_method: str = "none"
    epsilon_report: float = 0.0
    certificate: dict = field(default_factory=dict)
    lower_pi: Fraction | None = None
    upper_pi: Fraction | None = None

    def __post_init__(self):
        if self.upper != INF and self.lower > self.upper + 1e-9 + self.epsilon_report:
            raise ValueError(
                f"invalid bound: lower {self.lower} exceeds upper {self.upper}")

    def to_json_obj(self) -> dict:
        cert = {k: (v if not isinstance(v, Fraction) else str(v))
                for k, v in self.certificate.items()}
        return {
            "lower": self.lower,
            "upper": ("inf" if self.upper == INF else self.upper),
            "lower_method": self.lower_method,
            "upper_method": self.upper_method,
            "epsilon_report": self.epsilon_report,
            "certificate": cert,
            "lower_pi": (str(self.lower_pi) if self.lower_pi is not None else None),
            "upper_pi": (str(self.upper_pi) if self.upper_pi is not None else None),
        }


# ---------------------------------------------------------------------------
# Scalar formula: cel(e^{i alpha}) = min_k max_t |alpha(t) - 2k pi|
# ---------------------------------------------------------------------------

def _minmax_over_shifts(m, M, two: Fraction | float):
    """min over integers k of sup_t |alpha(t) - k*two|, where alpha has
    range [m, M] and `two` represents one full turn in the working unit
    (Fraction(2) for pi units, 2*pi for radians). The sup equals
    max(M - k*two, k*two - m). The scan covers |k| up to
    ceil(max|alpha| / two) + 1, which suffices: beyond it both endpoint
    distances grow with |k|.
    """
    bound = int(math.ceil(float(max(abs(m), abs(M))) / float(two))) + 1
    best = None
    best_k = 0
    for k in range(-bound, bound + 1):
        c = two * k
        cand = max(M - c, c - m)  # == max(|M-c|, |m-c|) since m <= M
        if best is None or cand < best:
            best, best_k = cand, k
    return best, best_k


def scalar_cel(alpha) -> Fraction | float:
    """Exponential length of the scalar unitary t -> exp(i alpha(t)).

    alpha: PiecewiseLinearFn holding alpha/pi (exact; returns the
    coefficient of pi as a Fraction) or a 1-d float array of radians
    (returns radians). The min-max is attained at range endpoints, hence
    exact for piecewise-linear input.
    """
    if isinstance(alpha, PiecewiseLinearFn):
        value, _ = _minmax_over_shifts(alpha.min_value(), alpha.max_value(),
                                       Fraction(2))
        return value
    arr = np.asarray(alpha, dtype=float)
    if arr.ndim != 1:
        raise ValueError("sampled alpha must be one-dimensional")
    value, _ = _minmax_over_shifts(float(arr.min()), float(arr.max()), TWO_PI)
    return float(value)


def scalar_cel_certificate(alpha):
    """scalar_cel plus the minimizing integer shift."""
    if isinstance(alpha, PiecewiseLinearFn):
        return _minmax_over_shifts(alpha.min_value(), alpha.max_value(), Fraction(2))
    arr = np.asarray(alpha, dtype=float)
    return _minmax_over_shifts(float(arr.min()), float(arr.max()), TWO_PI)


# ---------------------------------------------------------------------------
# Eigenvalue-branch lower bounds
# ---------------------------------------------------------------------------

def winding_pass_slack(thetas: np.ndarray, *, margin_scale: float = 4.0) -> float:
    """Certify lifted branches against invisible winding passes.

    If two branches come closer on the circle than the local sampling can
    resolve while their values differ by a nonzero multiple of 2 pi, the
    sampled data cannot decide whether they passed or bounced between grid
    points. An interior pass (the pair separates again afterwards) makes
    any stitching-based lower bound a guess: SpectralCollisionError. A pass
    zone reaching the boundary t=1 is benign (the competing stitchings have
    no room to diverge); the approach distance is returned as slack.
    """
    n, grid = thetas.shape
    if n == 1:
        return 0.0
    motion = float(np.max(np.abs(np.diff(thetas, axis=1)))) if grid > 1 else 0.0
    margin = margin_scale * motion + 1e-6
    escape = 4.0 * margin
    slack = 0.0
    for i in range(n - 1):
        for j in range(i + 1, n):
            s = thetas[i] - thetas[j]
            winding = np.round(s / TWO_PI)
            dist = np.abs(s - TWO_PI * winding)
            close = (np.abs(winding) >= 1) & (dist < margin)
            idx = np.nonzero(close)[0]
            if idx.size == 0:
                continue
            first = int(idx[0])
            after = dist[first:]
            if float(np.max(after)) > escape:
                raise SpectralCollisionError(
                    "winding-ambiguous eigenvalue pass between grid samples "
                    f"(branches {i},{j} near grid index {first}); the sampled "
                    "data cannot certify a lower bound, refine the grid",
                    t_index=first)
            slack = max(slack, float(np.max(dist[idx])) + motion)
    return slack


def _gapped_angle_branches(u: SampledMatrixField, tol: Tolerances,
                           winding_guard: bool
                           ) -> tuple[np.ndarray, np.ndarray, np.ndarray, float, float]:
    """Eigen data of a unitary field with a guaranteed spectral gap.

    Returns (thetas (n, grid), lam, vecs, eps_used, residual); when the raw
    field has near-coincident eigenvalues the angle-sorted spectrum is
    jittered by e^{i j eps} in place (the eigenbasis is untouched).
    """
    lam, vecs, residual = normal_unitary_eig(u.samples, tol)
    angles = np.angle(lam)
    eps_used = 0.0
    if np.min(circular_gaps(angles)) < tol.gap_tol:
        ranks = np.argsort(np.argsort(angles, axis=1, kind="stable"),
                           axis=1, kind="stable")
        for attempt in range(6):
            eps_used = tol.eps_jitter * (1.7 ** attempt)
            jittered = lam * np.exp(1j * eps_used * (ranks + 1))
            if np.min(circular_gaps(np.angle(jittered))) >= tol.gap_tol:
                lam = jittered
                angles = np.angle(lam)
                break
        else:
            raise SpectralCollisionError("jitter failed to open a spectral gap")
    anchors = np.sort(angles[0])
    thetas = lift_angle_array(angles, anchors, tol.tie_tol)
    pass_slack = winding_pass_slack(thetas) if winding_guard else 0.0
    return thetas, lam, vecs, eps_used, residual, pass_slack


def cel_lower_distinct(u: SampledMatrixField,
                       tol: Tolerances = DEFAULT_TOLERANCES) -> CelBound:
    """Lower bound max_j cel(e^{i theta_j}) over lifted eigenvalue branches.

    Valid because any path from u to 1 moves every continuous eigenvalue
    branch at least as far as the matrix path moves. Near-repeated spectra
    are jittered first; the induced slack (dim * eps) is folded into
    epsilon_report and already subtracted from nothing: the reported lower
    bound is the jittered value, correct for the original field up to
    epsilon_report.
    """
    if u.flavor != "unitary":
        raise FlavorError("cel_lower_distinct needs a unitary field")
    thetas, _, _, eps_used, residual, pass_slack = _gapped_angle_branches(
        u, tol, winding_guard=True)
    values = []
    for j in range(thetas.shape[0]):
        v, k = _minmax_over_shifts(float(thetas[j].min()), float(thetas[j].max()),
                                   TWO_PI)
        values.append((float(v), k))
    best_j = int(np.argmax([v for v, _ in values]))
    eps_report = u.dim * eps_used + 10 * residual + pass_slack
    return CelBound(
        lower=values[best_j][0],
        upper=INF,
        lower_method="distinct-eigenvalue-branches",
        epsilon_report=eps_report,
        certificate={"branch": best_j, "shift": values[best_j][1],
                     "jitter": eps_used},
    )


def cel_lower_ordered_log(e: EigenvalueListField,
                          tol: Tolerances = DEFAULT_TOLERANCES) -> CelBound:
    """Lower bound from an eigenvalue list of a logarithm H with u=exp(iH).

    Precondition: the whole list fits a window [alpha, alpha+2pi] for some
    alpha in [-2pi, 0); checked, violations name the failing inequality.
    Exact lists are in coefficient-of-pi units, sampled lists in radians.
    The bound is max over branches of the scalar min-max formula.
    """
    if e.is_exact:
        mins = [h.min_value() for h in e.exact]
        maxs = [h.max_value() for h in e.exact]
        m, M = min(mins), max(maxs)
        _check_window(m, M, Fraction(2))
        per = [_minmax_over_shifts(lo, hi, Fraction(2))
               for lo, hi in zip(mins, maxs)]
        best_j = max(range(len(per)), key=lambda j: per[j][0])
        value, shift = per[best_j]
        return CelBound(
            lower=float(value) * math.pi,
            upper=INF,
            lower_method="ordered-log-branches",
            certificate={"branch": best_j, "shift": shift},
            lower_pi=value,
        )
    s = e.samples
    m, M = float(s.min()), float(s.max())
    _check_window(m, M, TWO_PI)
    per = [_minmax_over_shifts(float(row.min()), float(row.max()), TWO_PI)
           for row in s]
    best_j = max(range(len(per)), key=lambda j: per[j][0])
    value, shift = per[best_j]
    return CelBound(
        lower=float(value),
        upper=INF,
        lower_method="ordered-log-branches",
        certificate={"branch": best_j, "shift": shift},
    )


def _check_window(m, M, two):
    """Feasibility of alpha in [-2pi, 0) with alpha <= h <= alpha + 2pi."""
    if m < -two:
        raise WindowError(f"min branch {m} < -2pi: no admissible alpha")
    if M - m > two:
        raise WindowError(f"branch spread {M - m} exceeds 2pi")
    if M >= two:
        raise WindowError(f"max branch {M} >= 2pi: alpha would be >= 0")


# ---------------------------------------------------------------------------
# 2-D unitary paths
# ---------------------------------------------------------------------------

class UnitaryPath2D:
    """A discretized path s -> v_s of unitary fields, v_1 = identity.

    Slices are produced on demand (a dense 2-D store would be wasteful at
    production grids); iteration is sequential in all consumers.
    """

    def __init__(self, s_grid: np.ndarray, provider: Callable[[int], SampledMatrixField],
                 *, dim: int, grid_size: int):
        self.s_grid = np.asarray(s_grid, dtype=float)
        if self.s_grid.ndim != 1 or self.s_grid.shape[0] < 2:
            raise ValueError("need at least two s samples")
        if self.s_grid[0] != 0.0 or self.s_grid[-1] != 1.0:
            raise ValueError("s grid must run from 0 to 1")
        self._provider = provider
        self.dim = dim
        self.grid_size = grid_size

    @property
    def n_s(self) -> int:
        return self.s_grid.shape[0]

    def slice(self, i: int) -> SampledMatrixField:
        out = self._provider(int(i))
        if out.dim != self.dim or out.grid_size != self.grid_size:
            raise ValueError("provider returned a mismatched slice")
        return out

    @staticmethod
    def from_slices(slices: Sequence[SampledMatrixField],
                    s_grid: np.ndarray | None = None) -> "UnitaryPath2D":
        slices = list(slices)
        if s_grid is None:
            s_grid = np.linspace(0.0, 1.0, len(slices))
        return UnitaryPath2D(s_grid, lambda i: slices[i], dim=slices[0].dim,
                             grid_size=slices[0].grid_size)

    @staticmethod
    def from_spectral(h: np.ndarray, vecs: np.ndarray, s_grid: np.ndarray,
                      tol: Tolerances = DEFAULT_TOLERANCES) -> "UnitaryPath2D":
        """Path v_s(t) = V(t) diag(e^{2 pi i (1-s) h_j(t)}) V(t)^*."""
        h = np.asarray(h, dtype=float)           # (n, grid)
        vecs = np.asarray(vecs, dtype=complex)   # (grid, n, n)
        n, grid = h.shape

        def provider(i: int) -> SampledMatrixField:
            s = float(np.asarray(s_grid)[i])
            phases = np.exp(2j * math.pi * (1.0 - s) * h.T)  # (grid, n)
            samples = np.einsum("bij,bj,bkj->bik", vecs, phases,
                                np.conjugate(vecs))
            return SampledMatrixField(samples, "unitary", tol=tol)

        return UnitaryPath2D(np.asarray(s_grid, dtype=float), provider,
                             dim=n, grid_size=grid)

    def endpoint_defects(self, target: SampledMatrixField) -> tuple[float, float]:
        """(sup ||v_0 - target||, sup ||v_1 - 1||)."""
        d0 = self.slice(0).sup_distance(target)
        eye = np.eye(self.dim)
        d1 = float(np.max(operator_norm(self.slice(self.n_s - 1).samples - eye)))
        return d0, d1


def path_length(path: UnitaryPath2D) -> float:
    """Chordal length sum_i sup_t ||v_{s_{i+1}}(t) - v_{s_i}(t)||_op.

    Converges to the rectifiable length from below as the s grid refines.
    """
    total = 0.0
    prev = path.slice(0)
    for i in range(1, path.n_s):
        cur = path.slice(i)
        total += prev.sup_distance(cur)
        prev = cur
    return total


def concatenate_paths(p1: UnitaryPath2D, p2: UnitaryPath2D) -> UnitaryPath2D:
    """Join two discretized paths end to start (reparametrized to [0,1]);
    p1 must end where p2 begins."""
    if p1.dim != p2.dim or p1.grid_size != p2.grid_size:
        raise ValueError("paths are not composable")
    seam = p1.slice(p1.n_s - 1).sup_distance(p2.slice(0))
    if seam > 1e-6:
        raise ValueError(f"paths do not join: seam gap {seam:.3e}")
    s1 = 0.5 * p1.s_grid
    s2 = 0.5 + 0.5 * p2.s_grid
    s = np.concatenate([s1, s2[1:]])

    def provider(i: int) -> SampledMatrixField:
        if i < p1.n_s:
            return p1.slice(i)
        return p2.slice(i - p1.n_s + 1)

    return UnitaryPath2D(s, provider, dim=p1.dim, grid_size=p1.grid_size)


def path_lower_bound_branches(path: UnitaryPath2D,
                              tol: Tolerances = DEFAULT_TOLERANCES
                              ) -> tuple[float, dict]:
    """max over branches of the s-arc-length of the 2-D lifted eigenvalue
    branches, measured as sum_i sup_t |theta_j(s_{i+1}, t) - theta_j(s_i, t)|.

    Requires distinct eigenvalues on the whole (s,t) grid; collisions raise
    with their location. Always a lower bound for the path length up to the
    chord-vs-arc discretization gap.
    """
    all_angles = []
    max_eps = 0.0
    for i in range(path.n_s):
        lam, _, _ = normal_unitary_eig(path.slice(i).samples, tol)
        angles = np.angle(lam)
        if np.min(circular_gaps(angles)) < tol.gap_tol:
            ranks = np.argsort(np.argsort(angles, axis=1, kind="stable"),
                               axis=1, kind="stable")
            for attempt in range(6):
                eps = tol.eps_jitter * (1.7 ** attempt)
                jittered = angles + eps * (ranks + 1)
                if np.min(circular_gaps(jittered)) >= tol.gap_tol:
                    angles = jittered
                    max_eps = max(max_eps, eps)
                    break
            else:
                bad = int(np.nonzero(circular_gaps(angles) < tol.gap_tol)[0][0])
                raise SpectralCollisionError(
                    f"unresolvable spectral collision at (s_index={i}, "
                    f"t_index={bad})", s_index=i, t_index=bad)
        all_angles.append(angles)
    anchors = np.sort(all_angles[0][0])
    prev = lift_angle_array(all_angles[0], anchors, tol.tie_tol)
    winding_pass_slack(prev)
    n = prev.shape[0]
    arc = np.zeros(n)
    for i in range(1, path.n_s):
        delta0 = match_step(prev[:, 0], all_angles[i][0], tol.tie_tol)
        cur = lift_angle_array(all_angles[i], prev[:, 0] + delta0, tol.tie_tol)
        winding_pass_slack(cur)
        step = np.max(np.abs(cur - prev), axis=1)
        if np.max(step) >= math.pi:
            raise SpectralCollisionError(
                f"branch moved by >= pi between s slices {i - 1} and {i}",
                s_index=i)
        arc += step
        prev = cur
    j = int(np.argmax(arc))
    slack = 2.0 * path.dim * max_eps * path.n_s
    return float(arc[j]), {"branch": j, "per_branch": arc.tolist(),
                           "jitter_slack": slack}


# ---------------------------------------------------------------------------
# Constructive CU upper bound (determinant-1 fields)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CuPathResult:
    """Constructive path certificate for a determinant-1 unitary field."""

    path: UnitaryPath2D
    length: float               # exact rectifiable length of the built path
    endpoint_error: float       # sup ||v_0 - u||
    eps_report: float
    shifts: tuple[int, ...]
    winding: int
    max_branch_norm: float      # max_j ||h_j||_inf after normalization
    n_repairs: int = 0          # winding-crossing tail swaps applied

    def bound(self) -> CelBound:
        return CelBound(
            lower=0.0, upper=self.length,
            lower_method="trivial", upper_method="cu-constructive-path",
            epsilon_report=self.eps_report,
            certificate={"shifts": list(self.shifts), "winding": self.winding},
        )


def _confine_branches(h: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]:
    """Repair winding crossings so that branch differences never pass an
    integer (units of full turns).

    A continuous lift anchored at t=0 can let two branches pass each other
    modulo 1 between grid samples (the spectra stay distinct at every grid
    point, so the pass is invisible pointwise); constant integer shifts can
    then no longer confine the family to a width-1 window. Whenever
    floor(h_i - h_j) changes across a grid step, the tails are swapped with
    the corresponding integer adjustment: the pointwise spectrum multiset
    and the branch sum are unchanged, the seam jump is below one grid step,
    and each swap removes one crossing. Returns (repaired h, column
    permutation per grid point for re-pairing spectral projections, number
    of swaps)."""
    h = h.copy()
    n, grid = h.shape
    perm = np.tile(np.arange(n), (grid, 1))
    swaps = 0
    max_rounds = 64 * n * n * (2 + int(np.max(np.abs(h))))
    for _ in range(max_rounds):
        found = False
        for i in range(n - 1):
            for j in range(i + 1, n):
                e = h[i] - h[j]
                fl = np.floor(e)
                jumps = np.nonzero(fl[1:] != fl[:-1])[0]
                for k in jumps:
                    k = int(k)
                    m = int(max(fl[k], fl[k + 1]))
                    if m == 0:
                        # a genuine value crossing, not a winding pass;
                        # relabeling would not change the function multiset
                        continue
                    tail = slice(k + 1, grid)
                    hi_tail = h[i, tail].copy()
                    h[i, tail] = h[j, tail] + m
                    h[j, tail] = hi_tail - m
                    pi_tail = perm[tail, i].copy()
                    perm[tail, i] = perm[tail, j]
                    perm[tail, j] = pi_tail
                    swaps += 1
                    found = True
                    break
                if found:
                    break
            if found:
                break
        if not found:
            return h, perm, swaps
    raise ArithmeticError("branch winding repair did not converge")


def _minimax_integer_shifts(mins: np.ndarray, maxs: np.ndarray, total: int
                            ) -> tuple[np.ndarray, float]:
    """Integer shifts c_j with sum c = total minimizing max_j ||h_j + c_j||.

    The achievable max-norms form a finite candidate set (one value per
    branch and integer shift in a bounded window); feasibility of a cap M
    reduces to per-branch shift intervals, so the optimum is found by a
    scan and ties break toward the lexicographically smallest vector.
    """
    nb = mins.shape[0]
    cands: set[float] = set()
    for j in range(nb):
        center = -(maxs[j] + mins[j]) / 2.0
        for c in range(int(math.floor(center)) - 2, int(math.ceil(center)) + 3):
            cands.add(max(maxs[j] + c, -(mins[j] + c)))
    eps = 1e-12

    def intervals(cap: float):
        lo = np.ceil(-cap - mins - eps).astype(np.int64)
        hi = np.floor(cap - maxs + eps).astype(np.int64)
        return lo, hi

    best_cap = None
    for cap in sorted(cands):
        lo, hi = intervals(cap)
        if np.all(lo <= hi) and lo.sum() <= total <= hi.sum():
            best_cap = cap
            break
    if best_cap is None:
        raise ArithmeticError("no feasible integer shift vector")
    lo, hi = intervals(best_cap)
    shifts = np.empty(nb, dtype=np.int64)
    remaining = total
    for j in range(nb):
        tail_hi = hi[j + 1:].sum()
        c = max(lo[j], remaining - tail_hi)
        shifts[j] = c
        remaining -= c
    assert remaining == 0
    return shifts, float(best_cap)


def cu_upper_bound_path(u: SampledMatrixField, *, s_points: int = 33,
                        tol: Tolerances = DEFAULT_TOLERANCES) -> CuPathResult:
    """Constructive path from a determinant-1 unitary field to the identity.

    Lifts the (jittered, if necessary) eigenvalue branches, normalizes
    their sum to zero by integer shifts chosen to minimize the largest
    branch norm, and rotates each spectral projection home:
    v_s = sum_j e^{2 pi i (1-s) h_j} p_j. For a dim-k field the minimized
    branch norms stay below (k-1)/k (up to jitter slack), so the exact
    length 2 pi max_j ||h_j|| is at most 2 pi (k-1)/k + eps_report.
    """
    if u.flavor != "unitary":
        raise FlavorError("cu_upper_bound_path needs a unitary field")
    det = np.linalg.det(u.samples)
    det_resid = float(np.max(np.abs(det - 1.0)))
    if det_resid > tol.tol_det:
        raise CommutatorError(
            f"det(u) deviates from 1 by {det_resid:.3e} (> tol_det); "
            "not a CU element of the matrix algebra")
    n = u.dim
    thetas, lam, vecs, eps_used, residual, _ = _gapped_angle_branches(
        u, tol, winding_guard=False)
    h = thetas / TWO_PI
    sums = h.sum(axis=0)
    jitter_sum = eps_used * n * (n + 1) / 2.0 / TWO_PI
    winding = int(round(float(sums[0]) - jitter_sum))
    sum_defect = float(np.max(np.abs(sums - winding - jitter_sum)))
    if sum_defect > 1e-6:
        raise AssertionError(
            f"branch sum is not the constant winding number: defect {sum_defect:.3e}"
            " (impossible for det = 1 inputs)")
    h, _, n_swaps = _confine_branches(h)
    mins = h.min(axis=1)
    maxs = h.max(axis=1)
    shifts, cap = _minimax_integer_shifts(mins, maxs, -winding)
    h_norm = h + shifts[:, None]
    max_norm = float(np.max(np.abs(h_norm)))
    eps_report = n * eps_used + 10.0 * residual + 2.0 * det_resid
    limit = (n - 1) / n + eps_report / TWO_PI + 1e-9
    if max_norm >= limit + 1e-12:
        raise AssertionError(
            f"normalized branch norm {max_norm:.6f} exceeds (k-1)/k + slack "
            f"{limit:.6f} (impossible for det = 1 inputs)")
    vecs_paired = _pair_columns(vecs, lam, h_norm, tol)
    s_grid = np.linspace(0.0, 1.0, s_points)
    path = UnitaryPath2D.from_spectral(h_norm, vecs_paired, s_grid, tol)
    # d v_s/ds has op norm 2 pi max_j |h_j(t)| pointwise, so the rectifiable
    # length is exactly 2 pi max_norm, independent of the s grid.
    length = TWO_PI * max_norm
    endpoint_error = path.slice(0).sup_distance(u)
    return CuPathResult(
        path=path, length=length, endpoint_error=endpoint_error,
        eps_report=eps_report, shifts=tuple(int(c) for c in shifts),
        winding=winding, max_branch_norm=max_norm, n_repairs=n_swaps)


def _pair_columns(vecs: np.ndarray, lam: np.ndarray, h: np.ndarray,
                  tol: Tolerances) -> np.ndarray:
    """Permute eigenvector columns per grid point so that column j carries
    the eigenvalue e^{2 pi i h[j, t]}.

    Both the branch values mod 1 and the spectral angles have pairwise
    circular gaps >= gap_tol, so the (order-preserving) assignment is
    unambiguous; the match residual is checked.
    """
    n, grid = h.shape
    target = np.mod(h.T, 1.0) * TWO_PI          # (grid, n)
    have = np.mod(np.angle(lam), TWO_PI)        # (grid, n)
    tsort = np.argsort(target, axis=1, kind="stable")
    hsort = np.argsort(have, axis=1, kind="stable")
    tvals = np.take_along_axis(target, tsort, axis=1)
    hvals = np.take_along_axis(have, hsort, axis=1)
    costs = np.stack(
        [np.max(np.abs(_wrap_angle(tvals - np.roll(hvals, -s, axis=1))), axis=1)
         for s in range(n)], axis=1)            # (grid, n_shifts)
    best = np.argmin(costs, axis=1)
    worst = float(np.max(np.take_along_axis(costs, best[:, None], axis=1)))
    if worst > 1e-6:
        raise ArithmeticError(f"branch/eigenvalue pairing residual {worst:.3e}")
    rolled = np.stack([np.roll(hsort, -s, axis=1) for s in range(n)], axis=1)
    chosen = np.take_along_axis(rolled, best[:, None, None], axis=1)[:, 0, :]
    perm = np.empty_like(chosen)
    np.put_along_axis(perm, tsort, chosen, axis=1)
    return np.take_along_axis(vecs, perm[:, None, :], axis=2)


def _wrap_angle(x: np.ndarray) -> np.ndarray:
    return -(np.mod(-x + math.pi, TWO_PI) - math.pi)


# ---------------------------------------------------------------------------
# Geodesic oracle
# ---------------------------------------------------------------------------

def geodesic_upper_bound(u: SampledMatrixField,
                         tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    """sup_t ||Log u(t)|| when the spectrum avoids -1, else +inf.

    The one-exponential path exp(i(1-s)H) has length ||H||, so this is
    always a valid upper bound for the exponential length.
    """
    if u.flavor != "unitary":
        raise FlavorError("geodesic_upper_bound needs a unitary field")
    lam, _, _ = normal_unitary_eig(u.samples, tol)
    theta = np.abs(np.angle(lam))
    peak = float(theta.max())
    if math.pi - peak < tol.gap_tol:
        return INF
    return peak


def bound_sandwich(u: SampledMatrixField, *, s_points: int = 17,
                   tol: Tolerances = DEFAULT_TOLERANCES) -> CelBound:
    """Combined certified bounds: branch lower bound against the best of the
    geodesic and constructive uppers."""
    low = cel_lower_distinct(u, tol)
    geo = geodesic_upper_bound(u, tol)
    upper, method = geo, "principal-log-geodesic"
    det = np.linalg.det(u.samples)
    if float(np.max(np.abs(det - 1.0))) <= tol.tol_det:
        cu = cu_upper_bound_path(u, s_points=s_points, tol=tol)
        if cu.length < upper:
            upper, method = cu.length, "cu-constructive-path"
    return CelBound(
        lower=low.lower, upper=upper,
        lower_method=low.lower_method, upper_method=method,
        epsilon_report=low.epsilon_report,
        certificate=low.certificate)
