"""Point-spectrum enumeration and spectral verification at finite truncation.

Eigenvalues of the transition operator are exactly the parameters some
composed stage map sends to 1; they are enumerated by backward iteration
(stage-wise d-th roots pulled from 1) and polished by Newton steps on the
composed map.  Backward iteration is the numerically stable direction near
the repelling boundary of the bounded set, which is also why the transient
limit probe reads stage moduli off verified backward chains rather than
re-running the (exponentially ill-conditioned) forward orbit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .julia import (
    DEFAULT_WINDOW,
    FiberedSystem,
    MembershipGrid,
    _pow_int,
    band_depth,
    boundary_pixels,
    eigvec,
    orbit,
    render,
)
from .machine import (
    RECURRENT,
    SparseTransitionMatrix,
    build_matrix,
    classify_chain,
)
from .numeration import base_product

DEDUP_TOL = 1e-10
ROOT_CAP = 200_000


@dataclass(frozen=True)
class RootSet:
    """Distinct depth-r preimages of 1 under the composed stage map."""

    depth: int
    roots: np.ndarray
    dedup_tol: float = DEDUP_TOL


@dataclass(frozen=True)
class PointSpectrum:
    """Root sets per depth; ``capped`` marks an early stop at the root budget."""

    levels: tuple[RootSet, ...]
    capped: bool

    def all_roots(self) -> np.ndarray:
        if not self.levels:
            return np.zeros(0, dtype=complex)
        return _dedup(np.concatenate([ls.roots for ls in self.levels]), DEDUP_TOL)


def preimage_stage(sys: FiberedSystem, r: int, w: complex) -> np.ndarray:
    """The d_r solutions of f_r(z) = w (with multiplicity at the critical value).

    Uses the principal d-th root (argument in (-pi/d, pi/d]) times all d-th
    roots of unity, then one Newton polish step on f_r.
    """
    if r < 1:
        raise ValueError("stages are 1-based")
    return _preimage_array(sys, r, np.asarray([w], dtype=complex)).reshape(-1)


def _preimage_array(sys: FiberedSystem, r: int, w: np.ndarray) -> np.ndarray:
    d = sys.d(r)
    p = sys.p(r)
    c = sys.center(r)
    zetas = np.exp(2j * np.pi * np.arange(d) / d)
    root = np.power(w, 1.0 / d)
    z = c + p * root[None, :] * zetas[:, None]  # (d, len(w))
    h = (z - c) / p
    fz = _pow_int_arr(h, d)
    fpz = d * _pow_int_arr(h, d - 1) / p
    safe = np.abs(fpz) > 1e-12
    z = np.where(safe, z - (fz - w[None, :]) / np.where(safe, fpz, 1.0), z)
    return z


def _pow_int_arr(z: np.ndarray, d: int) -> np.ndarray:
    result = np.ones_like(z)
    b = z.copy()
    e = d
    while e:
        if e & 1:
            result = result * b
        e >>= 1
        if e:
            b = b * b
    return result


def _composed_newton(sys: FiberedSystem, z: np.ndarray, depth: int, steps: int = 3) -> np.ndarray:
    """Newton refinement of f~_depth(z) = 1 with the chain-rule derivative."""
    z = z.astype(complex)
    for _ in range(steps):
        v = z.copy()
        deriv = np.ones_like(z)
        for r in range(1, depth + 1):
            h = (v - sys.center(r)) / sys.p(r)
            deriv = deriv * (sys.d(r) * _pow_int_arr(h, sys.d(r) - 1) / sys.p(r))
            v = _pow_int_arr(h, sys.d(r))
        resid = v - 1.0
        if np.abs(resid).max() < 1e-13:
            break
        safe = np.abs(deriv) > 1e-12
        z = np.where(safe, z - resid / np.where(safe, deriv, 1.0), z)
    return z


def _dedup(roots: np.ndarray, tol: float) -> np.ndarray:
    buckets: dict[tuple[int, int], list[complex]] = {}
    kept: list[complex] = []
    for z in roots:
        z = complex(z)
        kx = round(z.real / tol)
        ky = round(z.imag / tol)
        dup = False
        for nx in (kx - 1, kx, kx + 1):
            for ny in (ky - 1, ky, ky + 1):
                for other in buckets.get((nx, ny), ()):
                    if abs(z - other) <= tol:
                        dup = True
                        break
                if dup:
                    break
            if dup:
                break
        if not dup:
            kept.append(z)
            buckets.setdefault((kx, ky), []).append(z)
    kept.sort(key=lambda z: (z.real, z.imag))
    return np.asarray(kept, dtype=complex)


def point_spectrum(sys: FiberedSystem, r_max: int, cap: int = ROOT_CAP) -> PointSpectrum:
    """Depth-by-depth preimages of 1 under the composed maps, polished and
    deduplicated; stops with partial results once a depth would exceed ``cap``."""
    if r_max < 1:
        raise ValueError("r_max must be >= 1")
    levels = []
    capped = False
    for depth in range(1, r_max + 1):
        count = 1
        for j in range(1, depth + 1):
            count *= sys.d(j)
        if count > cap:
            capped = True
            break
        w = np.asarray([1.0 + 0.0j])
        for j in range(depth, 0, -1):
            w = _preimage_array(sys, j, w).reshape(-1)
        w = _composed_newton(sys, w, depth)
        levels.append(RootSet(depth, _dedup(w, DEDUP_TOL)))
    return PointSpectrum(tuple(levels), capped)


@dataclass(frozen=True)
class EigenReport:
    n_states: int
    tol: float
    residuals: tuple[tuple[complex, float], ...]
    max_residual: float
    ok: bool


def verify_eigenpairs(sys: FiberedSystem, roots, n: int, tol: float = 1e-9,
                      mat: SparseTransitionMatrix | None = None) -> EigenReport:
    """Residual of the eigen-equation over unclipped rows of the n-truncation.

    For each candidate eigenvalue lam the candidate eigenvector is built and
    the sup-norm of (S - lam I) v over unclipped rows compared to ``tol``.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if isinstance(roots, RootSet):
        roots = roots.roots
    if mat is None:
        mat = build_matrix(n, sys.base, sys.probs)
    csr = mat.to_csr()
    mask = mat.unclipped_mask()
    items = []
    worst = 0.0
    for lam in np.asarray(roots, dtype=complex):
        v = eigvec(sys, complex(lam), n)
        resid = float(np.abs((csr @ v - lam * v)[mask]).max())
        items.append((complex(lam), resid))
        worst = max(worst, resid)
    return EigenReport(n, tol, tuple(items), worst, worst <= tol)


def boundary_density(grid: MembershipGrid, rootsets) -> tuple[float, float]:
    """(sup over boundary pixels of distance to the nearest root,
    fraction of roots within two pixel diagonals of a boundary pixel)."""
    pix = boundary_pixels(grid)
    if pix.size == 0:
        raise ValueError("grid has no boundary pixels")
    if isinstance(rootsets, RootSet):
        rootsets = [rootsets]
    roots = np.concatenate([np.asarray(rs.roots, dtype=complex) for rs in rootsets])
    if roots.size == 0:
        raise ValueError("no roots supplied")
    centers = np.array([grid.center_at(r, c) for r, c in pix])
    cpts = np.column_stack([centers.real, centers.imag])
    rpts = np.column_stack([roots.real, roots.imag])
    dist_to_root, _ = cKDTree(rpts).query(cpts)
    dist_to_boundary, _ = cKDTree(cpts).query(rpts)
    coverage = float(np.mean(dist_to_boundary <= 2.0 * grid.pixel_diag()))
    return float(dist_to_root.max()), coverage


@dataclass(frozen=True)
class TransientReport:
    r_probe: int
    tail_product: float
    lower_bound: float
    interior_count: int
    interior_max_mod: float
    interior_ok: bool
    boundary_count: int
    boundary_min_mod: float
    boundary_max_mod: float
    boundary_ok: bool
    chain_step_residual: float
    boundary_samples: tuple[complex, ...] = field(default=(), repr=False)

    @property
    def ok(self) -> bool:
        return self.interior_ok and self.boundary_ok


def _deep_interior_mask(grid: MembershipGrid, erosion: int = 3) -> np.ndarray:
    mask = ~grid.escaped
    for _ in range(erosion):
        inner = mask.copy()
        inner[1:, :] &= mask[:-1, :]
        inner[:-1, :] &= mask[1:, :]
        inner[:, 1:] &= mask[:, :-1]
        inner[:, :-1] &= mask[:, 1:]
        inner[0, :] = inner[-1, :] = False
        inner[:, 0] = inner[:, -1] = False
        mask = inner
    return mask


CHAIN_DEGREE_LIMIT = 1_000_000


def _random_preimage(sys: FiberedSystem, r: int, w: complex, rng) -> complex:
    """One uniformly chosen solution of f_r(z) = w, Newton-polished."""
    d = sys.d(r)
    if d > CHAIN_DEGREE_LIMIT:
        raise ValueError(f"stage degree {d} too large for chain sampling")
    p = sys.p(r)
    c = sys.center(r)
    branch = int(rng.integers(0, d))
    z = c + p * w ** (1.0 / d) * np.exp(2j * np.pi * branch / d)
    h = (z - c) / p
    fpz = d * _pow_int(h, d - 1) / p
    if abs(fpz) > 1e-12:
        z = z - (_pow_int(h, d) - w) / fpz
    return complex(z)


def _boundary_chain(sys: FiberedSystem, depth: int, rng) -> tuple[complex, list[complex], float]:
    """One backward chain from 1 at stage ``depth`` down to the parameter plane.

    Returns (parameter, composed values v_1..v_depth, max one-step forward
    residual |f_j(v_{j-1}) - v_j|).  Backward steps contract, so the chain is
    a certified pseudo-orbit ending exactly at 1.
    """
    vals = [0j] * (depth + 1)
    vals[depth] = 1.0 + 0.0j
    for j in range(depth, 0, -1):
        vals[j - 1] = _random_preimage(sys, j, vals[j], rng)
    worst = 0.0
    for j in range(1, depth + 1):
        h = (vals[j - 1] - sys.center(j)) / sys.p(j)
        worst = max(worst, abs(_pow_int(h, sys.d(j)) - vals[j]))
    return vals[0], vals[1:], worst


def sample_bounded(sys: FiberedSystem, count: int, depth: int = 200, seed: int = 0,
                   window=DEFAULT_WINDOW, rejection_budget: int | None = None) -> list[complex]:
    """Random parameters certified bounded through ``depth``.

    Uniform rejection draws from the window are kept when the forward orbit
    stays bounded.  When the bounded set has (numerically) empty interior,
    rejection never hits, so the remainder is filled with random inverse-orbit
    points whose backward chains certify modulus <= 1 at every probed stage.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    budget = rejection_budget if rejection_budget is not None else 40 * count
    re_min, re_max, im_min, im_max = window
    out: list[complex] = []
    for _ in range(budget):
        if len(out) >= count:
            break
        lam = complex(rng.uniform(re_min, re_max), rng.uniform(im_min, im_max))
        if not orbit(sys, lam, depth).escaped:
            out.append(lam)
    chain_depth = depth
    for j in range(1, depth + 1):
        if sys.d(j) > CHAIN_DEGREE_LIMIT:
            chain_depth = j - 1
            break
    while len(out) < count:
        lam, _, resid = _boundary_chain(sys, chain_depth, rng)
        if resid < 1e-9:
            out.append(lam)
    return out


def transient_limit_check(sys: FiberedSystem, grid: MembershipGrid, sample_count: int,
                          r_probe: int, seed: int = 0, interior_threshold: float = 0.1,
                          band_slack: float = 0.05) -> TransientReport:
    """Probe the transient-regime limits at stage ``r_probe``.

    Deep-interior pixel centers are iterated forward and must have collapsed
    below ``interior_threshold``.  Near-boundary samples are depth-``r_probe``
    preimages of 1 built by backward iteration; their stage moduli are read
    off the verified chain and must stay within
    [2 * prod p - 1 - band_slack, 1].  Forward re-iteration is not used for
    the boundary samples: parameter error is amplified by roughly the product
    of d_r / p_r per stage, which swamps double precision near the boundary.
    """
    tail = sys.probs.infinite_product()
    if tail <= 0.0:
        raise ValueError("transient limit check requires a positive probability product")
    rng = np.random.default_rng(seed)
    lower = 2.0 * tail - 1.0 - band_slack

    interior = np.argwhere(_deep_interior_mask(grid))
    if interior.shape[0] == 0:
        raise ValueError("grid has no deep-interior pixels")
    take = min(sample_count, interior.shape[0])
    pick = rng.choice(interior.shape[0], size=take, replace=False)
    interior_max = 0.0
    for row, col in interior[pick]:
        v = complex(grid.center_at(int(row), int(col)))
        for r in range(1, r_probe + 1):
            v = _pow_int((v - sys.center(r)) / sys.p(r), sys.d(r))
        interior_max = max(interior_max, abs(v))

    boundary_mods = []
    samples = []
    chain_resid = 0.0
    for _ in range(sample_count):
        lam, vals, resid = _boundary_chain(sys, r_probe, rng)
        samples.append(lam)
        chain_resid = max(chain_resid, resid)
        boundary_mods.append(abs(vals[r_probe - 1]))
    b_min = min(boundary_mods)
    b_max = max(boundary_mods)

    return TransientReport(
        r_probe=r_probe,
        tail_product=tail,
        lower_bound=lower,
        interior_count=take,
        interior_max_mod=interior_max,
        interior_ok=interior_max < interior_threshold,
        boundary_count=sample_count,
        boundary_min_mod=b_min,
        boundary_max_mod=b_max,
        boundary_ok=(b_min >= lower and b_max <= 1.0 + 1e-12 and chain_resid < 1e-9),
        chain_step_residual=chain_resid,
        boundary_samples=tuple(samples),
    )


@dataclass(frozen=True)
class SpectrumReport:
    regime: str
    claimed_spectrum: str  # "E" or "boundary_of_E"
    evidence: dict
    ok: bool


def classify_spectrum(sys: FiberedSystem, depth: int, resolution: int = 256,
                      render_depth: int = 200, seed: int = 0) -> SpectrumReport:
    """Regime classification with attached numerical evidence.

    The vanishing-product regime claims the whole bounded set as spectrum;
    the positive-product regime claims only its boundary (and additionally
    must pass the transient limit probe).  Boundary density is reported as
    evidence from a pixel-matched band render; only the eigen-equation
    residuals and (in the transient regime) the limit probe gate ``ok``.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    regime = classify_chain(sys.probs, depth)
    claimed = "E" if regime == RECURRENT else "boundary_of_E"

    res = (resolution, resolution)
    band_grid = render(sys, DEFAULT_WINDOW, res, band_depth(res))
    ps = point_spectrum(sys, depth, cap=ROOT_CAP)
    n = 2
    for r in range(1, depth + 3):
        try:
            n = base_product(sys.base, r)
        except OverflowError:
            break
        if n >= 2048:
            break
    n = max(2, min(n, 2048))
    eig = verify_eigenpairs(sys, ps.all_roots(), n, tol=1e-8)
    sup_dist, coverage = boundary_density(band_grid, list(ps.levels))

    evidence: dict = {
        "eigenpairs": eig,
        "boundary_sup_min_dist": sup_dist,
        "boundary_coverage": coverage,
        "point_spectrum_capped": ps.capped,
    }
    ok = eig.ok
    if claimed == "boundary_of_E":
        deep_grid = render(sys, DEFAULT_WINDOW, res, render_depth)
        trep = transient_limit_check(sys, deep_grid, sample_count=20, r_probe=60,
                                     seed=seed)
        evidence["transient_limits"] = trep
        ok = ok and trep.ok
    return SpectrumReport(regime, claimed, evidence, ok)


def write_roots_csv(ps: PointSpectrum, path) -> None:
    """CSV with a ``depth,re,im`` header; a leading comment flags capped output."""
    lines = []
    if ps.capped:
        lines.append("# partial: root cap exceeded")
    lines.append("depth,re,im")
    for level in ps.levels:
        for z in level.roots:
            lines.append(f"{level.depth},{z.real:.17g},{z.imag:.17g}")
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")
