"""Replacement-library optimization for a single part.

Jointly optimizes d piece geometries and a per-frame piece assignment to
minimize a saliency-weighted position + velocity energy. The two blocks are
each solved exactly: the library update is a small dense normal-equations
solve (the saliency weights cancel there), and the labeling is a chain
dynamic program, globally optimal because the velocity term couples only
consecutive frames. With the velocity weight at zero the alternation is
exactly Lloyd's k-means.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .anim import diff_operator
from .errors import EmptyPiece, InvalidLibrarySize

DEFAULT_LAMBDA = 2.0


@dataclass(frozen=True)
class PartAnim:
    positions: np.ndarray        # (n, m_p, 3)
    triangles: np.ndarray        # (k_p, 3) local indices
    cuts: np.ndarray             # (n,) bool
    global_vertices: np.ndarray  # (m_p,) indices into the full mesh

    @property
    def n_frames(self):
        return self.positions.shape[0]

    @property
    def n_vertices(self):
        return self.positions.shape[1]

    def flat(self):
        """Frames as rows of length 3 m_p."""
        return self.positions.reshape(self.n_frames, -1)


@dataclass(frozen=True)
class ReplacementLibrary:
    pieces: np.ndarray               # (d, m_p, 3)
    frozen: frozenset = frozenset()  # piece indices whose geometry is fixed

    @property
    def size(self):
        return self.pieces.shape[0]

    def flat(self):
        return self.pieces.reshape(self.size, -1)


@dataclass(frozen=True)
class Assignment:
    labels: np.ndarray  # (n,) ints in [0, d)
    size: int           # d

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.min() < 0 or labels.max() >= self.size:
            raise ValueError("label out of range")
        object.__setattr__(self, "labels", labels)

    def selector(self):
        """Binary (d, n) matrix with a single 1 per column."""
        S = np.zeros((self.size, self.labels.shape[0]))
        S[self.labels, np.arange(self.labels.shape[0])] = 1.0
        return S


@dataclass(frozen=True)
class OptimConfig:
    lam: float = DEFAULT_LAMBDA
    restarts: int = 8
    max_iters: int = 100
    rel_tol: float = 1e-10
    rng_seed: int = 0

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("velocity weight must be non-negative")
        if self.restarts < 1:
            raise ValueError("need at least one restart")


def _weights3(weights, m):
    if weights is None:
        return np.ones(3 * m)
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.shape[0] != m:
        raise ValueError("weight vector length must match vertex count")
    if (w < 0).any() or not (w > 0).any():
        raise ValueError("weights must be non-negative and not all zero")
    return np.repeat(w, 3)


def _pair_active(cuts):
    """Mask over consecutive pairs (f, f+1): True where velocity is coupled.

    Matches the difference operator: a pair is disabled when either frame is
    a cut, except that frame 0's implicit clip start does not count.
    """
    cuts = np.asarray(cuts, dtype=bool)
    lead = cuts.copy()
    lead[0] = False
    return ~(lead[:-1] | cuts[1:])


def _part_cache(part: PartAnim, w3):
    """Library-independent quantities shared by every descent iteration."""
    X = part.flat()
    Xw = X if (w3 == 1.0).all() else X * w3
    dXw = Xw[1:] - Xw[:-1]
    dX = X[1:] - X[:-1] if Xw is not X else dXw
    return {
        "X": X,
        "Xw": Xw,
        "x2": (Xw * X).sum(axis=1),
        "active": _pair_active(part.cuts),
        "dx2": (dXw * dX).sum(axis=1),
    }


def _cost_tables(library: ReplacementLibrary, lam, w3, cache):
    """Per-frame unary costs and the velocity-term building blocks."""
    R = library.flat()
    Rw = R * w3
    C = cache["Xw"] @ R.T                         # (n, d) weighted cross terms
    r2 = (Rw * R).sum(axis=1)
    tab = {"unary": 0.5 * (cache["x2"][:, None] - 2.0 * C + r2[None, :]),
           "lam": lam, "rr": None, "dC": None}
    if lam > 0:
        tab["rr"] = r2[:, None] + r2[None, :] - 2.0 * (Rw @ R.T)
        tab["dC"] = C[1:] - C[:-1]                # dx_f . W r_k
    return tab


def _table_energy(tab, cache, labels):
    n = labels.shape[0]
    e = tab["unary"][np.arange(n), labels].sum()
    lam = tab["lam"]
    active = cache["active"]
    if lam > 0 and active.any():
        a, b = labels[:-1], labels[1:]
        f = np.arange(n - 1)
        vel = 0.5 * lam * (cache["dx2"] - 2.0 * (tab["dC"][f, b] - tab["dC"][f, a])
                           + tab["rr"][a, b])
        e += (vel * active).sum()
    return float(e)


def _table_assign(tab, cache, d) -> Assignment:
    """Chain DP over the tables; globally optimal, ties take the lowest index."""
    unary = tab["unary"]
    n = unary.shape[0]
    labels = np.empty(n, dtype=np.int64)
    if d == 1:
        labels[:] = 0
        return Assignment(labels, d)
    lam = tab["lam"]
    active = cache["active"]
    dx2 = cache["dx2"]
    cost = unary[0].copy()
    back = np.empty((n, d), dtype=np.int64)
    for f in range(1, n):
        if lam > 0 and active[f - 1]:
            # trans[a, b] = lam/2 (|dx|^2 - 2 (dC[b] - dC[a]) + rr[a, b])
            dC = tab["dC"][f - 1]
            trans = 0.5 * lam * (dx2[f - 1] - 2.0 * (dC[None, :] - dC[:, None])
                                 + tab["rr"])
            tot = cost[:, None] + trans
            back[f] = np.argmin(tot, axis=0)
            cost = tot[back[f], np.arange(d)] + unary[f]
        else:
            best = int(np.argmin(cost))
            back[f] = best
            cost = cost[best] + unary[f]
    labels[n - 1] = int(np.argmin(cost))
    for f in range(n - 1, 0, -1):
        labels[f - 1] = back[f, labels[f]]
    return Assignment(labels, d)


def total_energy(part: PartAnim, library: ReplacementLibrary,
                 assignment: Assignment, lam, weights=None) -> float:
    """E = 1/2 |X - R S|_W^2 + lam/2 |X G - R S G|_W^2 (matrix form)."""
    w3 = _weights3(weights, part.n_vertices)
    X = part.flat()
    Rsel = library.flat()[assignment.labels]
    resid = X - Rsel
    e = 0.5 * float((resid * resid * w3).sum())
    active = _pair_active(part.cuts)
    if lam > 0 and active.any():
        dresid = resid[1:] - resid[:-1]
        dresid = dresid[active]
        e += 0.5 * lam * float((dresid * dresid * w3).sum())
    return e


def per_frame_errors(part: PartAnim, library: ReplacementLibrary,
                     assignment: Assignment, lam, weights=None) -> np.ndarray:
    """Unary energy of each frame plus its incident velocity terms."""
    w3 = _weights3(weights, part.n_vertices)
    X = part.flat()
    resid = X - library.flat()[assignment.labels]
    unary = 0.5 * (resid * resid * w3).sum(axis=1)
    out = unary.copy()
    active = _pair_active(part.cuts)
    if lam > 0:
        dresid = resid[1:] - resid[:-1]
        pair = 0.5 * lam * (dresid * dresid * w3).sum(axis=1) * active
        out[:-1] += pair
        out[1:] += pair
    return out


def update_library(part: PartAnim, assignment: Assignment, lam,
                   frozen=frozenset(), library: ReplacementLibrary | None = None,
                   on_empty="raise", _cache=None) -> ReplacementLibrary:
    """Exact minimizer of the energy over the pieces with the labels fixed.

    Solves A R^T = B with A = S S^T + lam S G G^T S^T (d x d) and
    B = S X^T + lam S G G^T X^T; frozen pieces are moved to the right-hand
    side. The saliency weights cancel in the stationarity condition, so the
    result is weight-independent. A piece assigned to no frame makes A
    singular: with on_empty="raise" that raises EmptyPiece, with
    on_empty="worst-frame" the piece is excluded from the solve and set to
    the frame with the largest unary error (which leaves the energy value
    untouched, since no frame selects it).
    """
    d = assignment.size
    labels = assignment.labels
    n = part.n_frames
    frozen = frozenset(frozen) | (library.frozen if library is not None else frozenset())
    used = np.zeros(d, dtype=bool)
    used[labels] = True
    empty = [k for k in range(d) if not used[k] and k not in frozen]
    if empty and on_empty == "raise":
        raise EmptyPiece(empty[0])

    X = part.flat()                       # (n, q)
    G = diff_operator(part.cuts)          # (n, n-1) sparse
    if _cache is not None and "GtX" in _cache:
        GtX = _cache["GtX"]
    else:
        GtX = G.T @ X                     # (n-1, q), label-independent
        if _cache is not None:
            _cache["GtX"] = GtX
    S = sparse.csr_matrix(
        (np.ones(n), (labels, np.arange(n))), shape=(d, n))
    SG = (S @ G).toarray()                # (d, n-1)
    SX = S @ X                            # (d, q) grouped frame sums
    A = (S @ S.T).toarray() + lam * (SG @ SG.T)
    B = SX + lam * (SG @ GtX)             # (d, q)

    pieces = np.empty((d, X.shape[1]))
    if library is not None:
        pieces[:] = library.flat()
    fixed = sorted(frozen)
    solve_idx = [k for k in range(d) if k not in frozen and k not in empty]
    if solve_idx:
        Aff = A[np.ix_(solve_idx, solve_idx)]
        rhs = B[solve_idx]
        if fixed:
            if library is None:
                raise ValueError("frozen pieces require the current library")
            rhs = rhs - A[np.ix_(solve_idx, fixed)] @ pieces[fixed]
        pieces[solve_idx] = np.linalg.solve(Aff, rhs)

    if empty:
        ref = pieces[labels]
        err = ((X - ref) ** 2).sum(axis=1)
        worst = np.argsort(err)[::-1]
        for rank, k in enumerate(empty):
            pieces[k] = X[worst[rank % n]]
    return ReplacementLibrary(pieces.reshape(d, part.n_vertices, 3), frozenset(frozen))


def assign_labels(part: PartAnim, library: ReplacementLibrary, lam,
                  weights=None) -> Assignment:
    """Globally optimal per-frame labeling for a fixed library (chain DP).

    The energy splits into per-frame unary terms and velocity terms coupling
    only consecutive frames (zero across cuts), so dynamic programming over
    the d piece states is exact in O(n d^2). Ties take the lowest piece index.
    """
    w3 = _weights3(weights, part.n_vertices)
    cache = _part_cache(part, w3)
    tab = _cost_tables(library, lam, w3, cache)
    return _table_assign(tab, cache, library.size)


def bcd_single(part: PartAnim, init_labels, d, lam, weights=None,
               config: OptimConfig | None = None,
               fixed_library: ReplacementLibrary | None = None):
    """One block-coordinate-descent instance from a given initial labeling.

    Returns (library, assignment, energy, history); history holds one
    (labels, energy_after_update, energy_after_assign) record per iteration.
    """
    config = config or OptimConfig(lam=lam)
    assignment = Assignment(np.asarray(init_labels, dtype=np.int64), d)
    frozen = fixed_library.frozen if fixed_library is not None else frozenset()
    library = fixed_library
    history = []
    energy = np.inf
    w3 = _weights3(weights, part.n_vertices)
    cache = _part_cache(part, w3)
    ucache = {}
    for _ in range(config.max_iters):
        library = update_library(part, assignment, lam, frozen=frozen,
                                 library=library, on_empty="worst-frame",
                                 _cache=ucache)
        tab = _cost_tables(library, lam, w3, cache)
        e_half = _table_energy(tab, cache, assignment.labels)
        new_assignment = _table_assign(tab, cache, d)
        e_full = _table_energy(tab, cache, new_assignment.labels)
        history.append((new_assignment.labels.copy(), e_half, e_full))
        unchanged = np.array_equal(new_assignment.labels, assignment.labels)
        assignment = new_assignment
        converged = (np.isfinite(energy)
                     and energy - e_full <= config.rel_tol * max(abs(energy), 1.0))
        energy = e_full
        if unchanged or converged:
            break
    return library, assignment, energy, history


def restart_seeds(config: OptimConfig):
    return np.random.SeedSequence(config.rng_seed).spawn(config.restarts)


def bcd_optimize(part: PartAnim, d, lam=None, weights=None,
                 config: OptimConfig | None = None,
                 fixed_library: ReplacementLibrary | None = None):
    """Best-of-restarts block coordinate descent.

    One deterministic restart is warm-started from a library of frames
    sampled uniformly over time, so the result is never worse than that
    baseline; every other restart starts from a uniformly random labeling
    drawn from a spawned child of the configured seed. A fully frozen fixed
    library reduces to a single labeling pass. Returns (library, assignment,
    energy).
    """
    config = config or OptimConfig()
    if lam is None:
        lam = config.lam
    n = part.n_frames
    if not 1 <= d <= n:
        raise InvalidLibrarySize(f"library size {d} not in [1, {n}]")
    if fixed_library is not None:
        if fixed_library.size != d:
            raise InvalidLibrarySize("fixed library size disagrees with d")
        assignment = assign_labels(part, fixed_library, lam, weights)
        if len(fixed_library.frozen) == d:
            energy = total_energy(part, fixed_library, assignment, lam, weights)
            return fixed_library, assignment, energy
        lib, assignment, energy, _ = bcd_single(
            part, assignment.labels, d, lam, weights, config, fixed_library)
        return lib, assignment, energy

    best = None
    for init in _restart_inits(part, d, lam, weights, config):
        lib, assignment, energy, _ = bcd_single(part, init, d, lam, weights, config)
        if best is None or energy < best[2]:
            best = (lib, assignment, energy)
    return best


def _restart_inits(part, d, lam, weights, config):
    """Initial labelings for bcd_optimize: a uniform-time warm start followed
    by the configured number of random restarts."""
    n = part.n_frames
    idx = np.linspace(0, n - 1, d).round().astype(int)
    uniform = ReplacementLibrary(part.positions[idx].copy())
    yield assign_labels(part, uniform, lam, weights).labels
    for seed in restart_seeds(config):
        rng = np.random.default_rng(seed)
        yield rng.integers(0, d, size=n)


def _warm_started(part, library, extra, lam, weights, config):
    """Grow a library by `extra` worst-fit frames and re-descend."""
    assignment = assign_labels(part, library, lam, weights)
    err = per_frame_errors(part, library, assignment, lam, weights)
    order = np.argsort(err)[::-1]
    X = part.flat()
    pieces = np.concatenate([library.flat(), X[order[:extra]]], axis=0)
    grown = ReplacementLibrary(pieces.reshape(-1, part.n_vertices, 3), library.frozen)
    init = assign_labels(part, grown, lam, weights)
    return bcd_single(part, init.labels, grown.size, lam, weights, config)[:3]


def sweep_library_size(part: PartAnim, lam, weights=None,
                       config: OptimConfig | None = None,
                       sizes=None, error_cap=None):
    """Error-versus-size curve, or the smallest size meeting a per-frame cap.

    In sizes mode returns [(d, energy, library, assignment)] for each size,
    non-increasing in energy because every size also tries a warm start from
    the previous best solution extended with the worst-fit frames. In cap
    mode grows d until max per-frame (unary + incident velocity) error drops
    to error_cap, raising CapUnreachable if even d = n falls short.
    """
    from .errors import CapUnreachable

    config = config or OptimConfig()
    n = part.n_frames
    if (sizes is None) == (error_cap is None):
        raise ValueError("specify exactly one of sizes or error_cap")
    if sizes is not None:
        sizes = sorted(set(int(d) for d in sizes))
        if not sizes:
            raise ValueError("sizes is empty")
    else:
        if error_cap <= 0:
            raise ValueError("error_cap must be positive")
        sizes = list(range(1, n + 1))

    out = []
    prev = None
    for d in sizes:
        lib, assignment, energy = bcd_optimize(part, d, lam, weights, config)
        if prev is not None and d > prev[0].size:
            wlib, wassign, wenergy = _warm_started(
                part, prev[0], d - prev[0].size, lam, weights, config)
            if wenergy < energy:
                lib, assignment, energy = wlib, wassign, wenergy
        prev = (lib, assignment)
        out.append((d, energy, lib, assignment))
        if error_cap is not None:
            worst = per_frame_errors(part, lib, assignment, lam, weights).max()
            if worst <= error_cap:
                return d, lib, assignment
    if error_cap is not None:
        raise CapUnreachable(f"cap {error_cap} unreachable even with d = n")
    return out
