"""Finite cochain complexes as matrices: checkers, builders, cohomology.

A :class:`FiniteComplex` is a list of space dimensions together with the
differential matrices ``D_i`` (mapping space ``i`` to space ``i+1``) whose
consecutive compositions vanish.  Two complexes can be linked by a
:class:`MorphismPair` of extension maps (small space into big space) and
reduction maps (big onto small); :func:`check_assumption_A` and
:func:`check_assumption_B` verify the compatibility conditions under which
the linked complexes have isomorphic cohomology -- the B variant requires
reduction after extension to be the identity on the whole small space,
the A variant only on kernels of the differentials.

Given a reduced pair ``(W, What)`` and an enhanced pair ``(W, V)`` that
satisfy these conditions, :func:`build_enhanced_serendipity` constructs the
fourth complex ``Vhat`` (reduced and enhanced at once) together with the
four connecting maps, and :func:`verify_build` replays every identity the
construction is supposed to satisfy, including equality of Betti numbers
across the resulting square of complexes.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.sparse as sps

__all__ = [
    "FiniteComplex",
    "MorphismPair",
    "CheckResult",
    "CheckReport",
    "CohomologyReport",
    "SerendipityBuild",
    "numeric_rank",
    "nullspace",
    "check_assumption_A",
    "check_assumption_B",
    "complement_decomposition",
    "build_enhanced_serendipity",
    "verify_build",
    "random_complex_instance",
]

DEFAULT_TOL = 1e-10


def _dense(mat) -> np.ndarray:
    if sps.issparse(mat):
        return mat.toarray()
    return np.asarray(mat, dtype=float)


def _norm(mat) -> float:
    return float(np.linalg.norm(_dense(mat)))


def numeric_rank(mat, tol: float = DEFAULT_TOL) -> int:
    """Rank as the number of singular values above ``tol * sigma_max``.

    Matrices with at most 400 entries whose entries are exactly
    representable small rationals are additionally cross-checked by exact
    Gaussian elimination over the rationals; a disagreement raises.
    """
    if not 0 < tol <= 1e-6:
        raise ValueError("tolerance must lie in (0, 1e-6]")
    a = _dense(mat)
    if a.size == 0:
        return 0
    sv = np.linalg.svd(a, compute_uv=False)
    smax = sv[0]
    rank = int(np.count_nonzero(sv > tol * smax)) if smax > 0 else 0
    if a.size <= 400:
        exact = _rational_rank(a)
        if exact is not None and exact != rank:
            raise ArithmeticError(
                f"numeric rank {rank} disagrees with exact rational rank {exact}")
    return rank


def _rational_rank(a: np.ndarray, max_den: int = 1 << 20) -> int | None:
    rows = []
    for row in a:
        frac_row = []
        for x in row:
            fr = Fraction(float(x)).limit_denominator(max_den)
            if float(fr) != float(x):
                return None
            frac_row.append(fr)
        rows.append(frac_row)
    m, n = a.shape
    rank = 0
    col = 0
    while rank < m and col < n:
        piv = next((r for r in range(rank, m) if rows[r][col] != 0), None)
        if piv is None:
            col += 1
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        pr = rows[rank]
        for r in range(rank + 1, m):
            if rows[r][col] != 0:
                fac = rows[r][col] / pr[col]
                rows[r] = [x - fac * y for x, y in zip(rows[r], pr)]
        rank += 1
        col += 1
    return rank


def nullspace(mat, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Orthonormal basis of the kernel, columns; deterministic sign."""
    a = _dense(mat)
    if a.size == 0:
        return np.eye(a.shape[1])
    u, sv, vt = np.linalg.svd(a)
    smax = sv[0] if len(sv) else 0.0
    ncols = a.shape[1]
    rank = int(np.count_nonzero(sv > tol * smax)) if smax > 0 else 0
    basis = vt[rank:].T
    for j in range(basis.shape[1]):
        col = basis[:, j]
        lead = np.flatnonzero(np.abs(col) > 1e-12)
        if len(lead) and col[lead[0]] < 0:
            basis[:, j] = -col
    return basis


@dataclass(frozen=True)
class CohomologyReport:
    dims: tuple[int, ...]
    kernel_dims: tuple[int, ...]
    ranks: tuple[int, ...]          # rank of the incoming differential
    betti: tuple[int, ...]

    def euler_characteristic_identity(self) -> bool:
        alt_dim = sum((-1) ** i * d for i, d in enumerate(self.dims))
        alt_betti = sum((-1) ** i * b for i, b in enumerate(self.betti))
        return alt_dim == alt_betti


class FiniteComplex:
    """Cochain complex with matrix differentials ``D_i: V_i -> V_{i+1}``."""

    def __init__(self, dims, diffs):
        self.dims = tuple(int(d) for d in dims)
        self.diffs = list(diffs)
        if len(self.diffs) != len(self.dims) - 1:
            raise ValueError("need exactly len(dims) - 1 differentials")
        for i, d in enumerate(self.diffs):
            if d.shape != (self.dims[i + 1], self.dims[i]):
                raise ValueError(
                    f"differential {i} has shape {d.shape}, expected "
                    f"({self.dims[i + 1]}, {self.dims[i]})")

    def __len__(self) -> int:
        return len(self.dims)

    def diff(self, i: int):
        """``D_i``, extended by zero maps outside the stored range."""
        if 0 <= i < len(self.diffs):
            return self.diffs[i]
        if i == -1:
            return np.zeros((self.dims[0], 0))
        if i == len(self.diffs):
            return np.zeros((0, self.dims[-1]))
        raise IndexError(i)

    def composition_residuals(self) -> list[float]:
        out = []
        for i in range(len(self.diffs) - 1):
            prod = _dense(self.diffs[i + 1] @ self.diffs[i])
            scale = max(_norm(self.diffs[i + 1]) * _norm(self.diffs[i]), 1e-300)
            out.append(float(np.linalg.norm(prod)) / scale)
        return out

    def validate(self, tol: float = DEFAULT_TOL) -> None:
        for i, res in enumerate(self.composition_residuals()):
            if res > tol:
                raise ValueError(
                    f"composition D_{i + 1} D_{i} has relative norm {res:.3e}")

    def kernel_basis(self, i: int, tol: float = DEFAULT_TOL) -> np.ndarray:
        return nullspace(self.diff(i), tol)

    def cohomology(self, tol: float = DEFAULT_TOL) -> CohomologyReport:
        kdims, ranks, betti = [], [], []
        for i in range(len(self.dims)):
            rank_out = numeric_rank(self.diff(i), tol) if i < len(self.diffs) else 0
            rank_in = numeric_rank(self.diff(i - 1), tol) if i > 0 else 0
            kdim = self.dims[i] - rank_out
            kdims.append(kdim)
            ranks.append(rank_in)
            betti.append(kdim - rank_in)
        return CohomologyReport(self.dims, tuple(kdims), tuple(ranks), tuple(betti))


@dataclass
class MorphismPair:
    """Extensions (small -> big) and reductions (big -> small) per index."""

    extensions: list
    reductions: list
    small: FiniteComplex | None = None
    big: FiniteComplex | None = None

    def __post_init__(self):
        if len(self.extensions) != len(self.reductions):
            raise ValueError("need one extension and one reduction per index")
        if self.small is not None and self.big is not None:
            for i, (e, r) in enumerate(zip(self.extensions, self.reductions)):
                if e.shape != (self.big.dims[i], self.small.dims[i]):
                    raise ValueError(f"extension {i} has shape {e.shape}")
                if r.shape != (self.small.dims[i], self.big.dims[i]):
                    raise ValueError(f"reduction {i} has shape {r.shape}")


@dataclass(frozen=True)
class CheckResult:
    name: str
    index: int
    residual: float
    passed: bool

    def line(self) -> str:
        status = "pass" if self.passed else "fail"
        return f"{self.name} {self.index} {self.residual:.3e} {status}"


class CheckReport:
    def __init__(self, results=None):
        self.results: list[CheckResult] = list(results) if results else []

    def add(self, name: str, index: int, residual: float, tol: float) -> None:
        self.results.append(CheckResult(name, index, float(residual),
                                        bool(residual <= tol)))

    def add_flag(self, name: str, index: int, ok: bool) -> None:
        self.results.append(CheckResult(name, index, 0.0 if ok else 1.0, bool(ok)))

    def extend(self, other: "CheckReport") -> None:
        self.results.extend(other.results)

    @property
    def ok(self) -> bool:
        return all(r.passed for r in self.results)

    def failures(self) -> list[CheckResult]:
        return [r for r in self.results if not r.passed]

    def __str__(self) -> str:
        return "\n".join(r.line() for r in self.results)


def _rel_residual(lhs, rhs) -> float:
    l, r = _dense(lhs), _dense(rhs)
    scale = max(np.linalg.norm(l), np.linalg.norm(r), 1.0)
    return float(np.linalg.norm(l - r)) / scale


def _image_containment_defect(span_mat, extra, tol) -> float:
    """How far the columns of ``extra`` stick out of the column span."""
    a = _dense(span_mat)
    b = _dense(extra)
    if b.size == 0 or np.linalg.norm(b) <= tol:
        return 0.0
    base_rank = numeric_rank(a, tol) if a.size else 0
    bn = b / max(np.linalg.norm(b), 1e-300)
    joint = np.hstack([a, bn]) if a.size else bn
    joint_rank = numeric_rank(joint, tol)
    if joint_rank == base_rank:
        return 0.0
    # quantify: residual of least-squares onto the span
    if a.size == 0:
        return float(np.linalg.norm(bn))
    proj, *_ = np.linalg.lstsq(a, b, rcond=None)
    return float(np.linalg.norm(a @ proj - b)) / max(np.linalg.norm(b), 1e-300)


def _check_morphisms(big: FiniteComplex, small: FiniteComplex, maps: MorphismPair,
                     tol: float, full_identity: bool,
                     names: tuple[str, str, str]) -> CheckReport:
    id_name, defect_name, cochain_name = names
    rep = CheckReport()
    n = len(small)
    for i in range(n):
        e, r = maps.extensions[i], maps.reductions[i]
        re = _dense(r @ e)
        if full_identity:
            rep.add(id_name, i, _rel_residual(re, np.eye(small.dims[i])), tol)
        else:
            ker = small.kernel_basis(i, tol)
            res = _rel_residual(re @ ker, ker) if ker.size else 0.0
            rep.add(id_name, i, res, tol)
    for i in range(n):
        # (E R - Id) applied to the kernel of the big differential at index i
        # must land in the image of the previous big differential
        ker = big.kernel_basis(i, tol)
        if ker.size == 0:
            rep.add(defect_name, i, 0.0, tol)
            continue
        er = maps.extensions[i] @ maps.reductions[i]
        defect = _dense(er @ ker) - ker
        span = _dense(big.diff(i - 1)) if i > 0 else np.zeros((big.dims[i], 0))
        rep.add(defect_name, i, _image_containment_defect(span, defect, tol), tol)
    for i in range(n - 1):
        lhs = maps.reductions[i + 1] @ big.diff(i)
        rhs = small.diff(i) @ maps.reductions[i]
        rep.add(cochain_name + "_red", i, _rel_residual(lhs, rhs), tol)
        lhs = maps.extensions[i + 1] @ small.diff(i)
        rhs = big.diff(i) @ maps.extensions[i]
        rep.add(cochain_name + "_ext", i, _rel_residual(lhs, rhs), tol)
    return rep


def check_assumption_A(big: FiniteComplex, reduced: FiniteComplex,
                       maps: MorphismPair, tol: float = 1e-9) -> CheckReport:
    """Kernel-identity, image-defect and cochain conditions for a reduced pair.

    Also verifies that the reduced differential is induced, i.e. equals
    reduction of the big differential applied after extension.
    """
    rep = _check_morphisms(big, reduced, maps, tol, full_identity=False,
                           names=("kernel_identity", "image_defect", "cochain"))
    for i in range(len(reduced) - 1):
        induced = maps.reductions[i + 1] @ big.diff(i) @ maps.extensions[i]
        rep.add("induced_differential", i, _rel_residual(induced, reduced.diff(i)), tol)
    return rep


def check_assumption_B(big: FiniteComplex, base: FiniteComplex,
                       maps: MorphismPair, tol: float = 1e-9) -> CheckReport:
    """Like the A conditions but with reduction-after-extension equal to the
    identity on the entire base space."""
    return _check_morphisms(big, base, maps, tol, full_identity=True,
                            names=("full_identity", "image_defect", "cochain"))


@dataclass
class ComplementDecomposition:
    bases: list[np.ndarray]       # orthonormal kernel bases of the reductions
    projectors: list[np.ndarray]  # projection onto the complement inside V_i


def complement_decomposition(big: FiniteComplex, base: FiniteComplex,
                             maps: MorphismPair, tol: float = DEFAULT_TOL,
                             bases: list[np.ndarray] | None = None
                             ) -> ComplementDecomposition:
    """Complement ``C_i = ker(reduction_i)`` and the projector onto it.

    The projector is ``Id - extension @ reduction``; if explicit complement
    ``bases`` are supplied (columns spanning the kernel) they are used
    verbatim, otherwise orthonormal kernel bases are computed.
    """
    out_bases, out_proj = [], []
    for i in range(len(base)):
        e, r = maps.extensions[i], maps.reductions[i]
        c = bases[i] if bases is not None else nullspace(_dense(r), tol)
        expected = big.dims[i] - base.dims[i]
        if c.shape[1] != expected:
            raise ValueError(
                f"complement dimension {c.shape[1]} at index {i}, expected "
                f"{expected}; the reduction is not surjective")
        pi = np.eye(big.dims[i]) - _dense(e @ r)
        out_bases.append(c)
        out_proj.append(pi)
    return ComplementDecomposition(out_bases, out_proj)


@dataclass
class SerendipityBuild:
    """Reduced enhanced complex with its four connecting map families."""

    base: FiniteComplex            # W
    reduced_base: FiniteComplex    # What
    enhanced: FiniteComplex        # V
    maps_reduced: MorphismPair     # What <-> W
    maps_enhanced: MorphismPair    # W <-> V
    complement: ComplementDecomposition
    complex: FiniteComplex         # Vhat
    ext_from_reduced: list         # What_i -> Vhat_i
    red_to_reduced: list           # Vhat_i -> What_i
    ext_to_enhanced: list          # Vhat_i -> V_i
    red_from_enhanced: list        # V_i -> Vhat_i

    def enhanced_maps(self) -> MorphismPair:
        return MorphismPair(self.ext_to_enhanced, self.red_from_enhanced,
                            small=self.complex, big=self.enhanced)

    def reduced_maps(self) -> MorphismPair:
        return MorphismPair(self.ext_from_reduced, self.red_to_reduced,
                            small=self.reduced_base, big=self.complex)


def build_enhanced_serendipity(base: FiniteComplex, reduced_base: FiniteComplex,
                               enhanced: FiniteComplex, maps_reduced: MorphismPair,
                               maps_enhanced: MorphismPair,
                               complement_bases: list[np.ndarray] | None = None,
                               tol: float = DEFAULT_TOL) -> SerendipityBuild:
    """Construct the reduced enhanced complex from the three given ones.

    Space ``i`` of the result is the product of reduced-base space ``i``
    with the complement ``C_i``; the differential acts diagonally (the
    reduced differential on the first factor, the enhanced differential
    restricted to the complement on the second).
    """
    comp = complement_decomposition(enhanced, base, maps_enhanced, tol,
                                    bases=complement_bases)
    n = len(base)
    dims = [reduced_base.dims[i] + comp.bases[i].shape[1] for i in range(n)]
    diffs = []
    for i in range(n - 1):
        c_lo, c_hi = comp.bases[i], comp.bases[i + 1]
        d_c = np.zeros((c_hi.shape[1], c_lo.shape[1]))
        if c_lo.size and c_hi.size:
            image = _dense(enhanced.diff(i) @ c_lo)
            d_c = np.linalg.lstsq(c_hi, image, rcond=None)[0]
            res = np.linalg.norm(c_hi @ d_c - image)
            scale = max(np.linalg.norm(image), 1.0)
            if res / scale > max(tol, 1e-12) * 100:
                raise ValueError(
                    f"enhanced differential does not map complement {i} into "
                    f"complement {i + 1} (residual {res / scale:.3e})")
        elif c_lo.size:
            image = _dense(enhanced.diff(i) @ c_lo)
            if np.linalg.norm(image) > tol * max(_norm(enhanced.diff(i)), 1.0):
                raise ValueError(f"complement {i} leaks outside complement {i + 1}")
        diffs.append(_block_diag(reduced_base.diff(i), d_c))
    built = FiniteComplex(dims, diffs)

    ext_from_reduced, red_to_reduced = [], []
    ext_to_enhanced, red_from_enhanced = [], []
    for i in range(n):
        nw, nc = reduced_base.dims[i], comp.bases[i].shape[1]
        ehat = np.zeros((dims[i], nw))
        ehat[:nw, :] = np.eye(nw)
        rhat = np.zeros((nw, dims[i]))
        rhat[:, :nw] = np.eye(nw)
        ext_from_reduced.append(ehat)
        red_to_reduced.append(rhat)

        ev = np.zeros((enhanced.dims[i], dims[i]))
        ev[:, :nw] = _dense(maps_enhanced.extensions[i] @ maps_reduced.extensions[i])
        if nc:
            ev[:, nw:] = comp.bases[i]
        ext_to_enhanced.append(ev)

        rv = np.zeros((dims[i], enhanced.dims[i]))
        rv[:nw, :] = _dense(maps_reduced.reductions[i] @ maps_enhanced.reductions[i])
        if nc:
            rv[nw:, :] = comp.bases[i].T @ comp.projectors[i]
        red_from_enhanced.append(rv)

    return SerendipityBuild(base, reduced_base, enhanced, maps_reduced,
                            maps_enhanced, comp, built, ext_from_reduced,
                            red_to_reduced, ext_to_enhanced, red_from_enhanced)


def _block_diag(a, b) -> np.ndarray:
    a = _dense(a)
    b = _dense(b)
    out = np.zeros((a.shape[0] + b.shape[0], a.shape[1] + b.shape[1]))
    out[:a.shape[0], :a.shape[1]] = a
    out[a.shape[0]:, a.shape[1]:] = b
    return out


def verify_build(build: SerendipityBuild, tol: float = 1e-9) -> CheckReport:
    """Replay every identity of the construction plus Betti equality."""
    rep = CheckReport()
    n = len(build.base)
    W, What, V, Vhat = build.base, build.reduced_base, build.enhanced, build.complex
    mr, me = build.maps_reduced, build.maps_enhanced
    for i in range(n):
        ehat, rhat = build.ext_from_reduced[i], build.red_to_reduced[i]
        ev, rv = build.ext_to_enhanced[i], build.red_from_enhanced[i]
        rep.add("reduce_commutes_w", i,
                _rel_residual(mr.reductions[i] @ me.reductions[i], rhat @ rv), tol)
        rep.add("reduce_commutes_v", i,
                _rel_residual(ehat @ mr.reductions[i], rv @ me.extensions[i]), tol)
        rep.add("extend_commutes_w", i,
                _rel_residual(mr.extensions[i] @ rhat, me.reductions[i] @ ev), tol)
        rep.add("extend_commutes_v", i,
                _rel_residual(me.extensions[i] @ mr.extensions[i], ev @ ehat), tol)
    for i in range(n - 1):
        rep.add("hat_reduction_cochain", i,
                _rel_residual(What.diff(i) @ build.red_to_reduced[i],
                              build.red_to_reduced[i + 1] @ Vhat.diff(i)), tol)
    hat_maps = build.enhanced_maps()
    rep.extend(_check_morphisms(V, Vhat, hat_maps, tol, full_identity=False,
                                names=("kernel_identity", "image_defect",
                                       "cochain")))
    for i, res in enumerate(Vhat.composition_residuals()):
        rep.add("complex_property", i, res, max(tol, DEFAULT_TOL))
    betti = [c.cohomology().betti
             for c in (W, What, V, Vhat)]
    rep.add_flag("betti_equality", 0, len({tuple(b) for b in betti}) == 1)
    return rep


# ----------------------------------------------------------------------
# random instances
# ----------------------------------------------------------------------

@dataclass
class RandomInstance:
    base: FiniteComplex
    reduced: FiniteComplex
    enhanced: FiniteComplex
    maps_reduced: MorphismPair
    maps_enhanced: MorphismPair
    betti: tuple[int, ...]


def _random_orthogonal(rng, n: int) -> np.ndarray:
    if n == 0:
        return np.zeros((0, 0))
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def random_complex_instance(seed: int, pattern: str = "derham") -> RandomInstance:
    """Seeded random triple (base, reduced, enhanced) satisfying the
    compatibility assumptions by construction.

    ``pattern`` selects the number of spaces per complex: "derham" gives
    three, "stokes" four.  The base complex is generated in canonical
    coordinates (image / harmonic / coimage blocks) and conjugated by
    random orthogonal maps; the reduced complex drops matched coimage and
    image directions; the enhanced complex appends an exact complement
    complex whose first map is injective.
    """
    rng = np.random.default_rng(seed)
    n = 4 if pattern == "stokes" else 3

    ranks = rng.integers(1, 4, size=n - 1)
    harm = rng.integers(0, 3, size=n)
    dims = [int((ranks[i - 1] if i > 0 else 0) + harm[i]
                + (ranks[i] if i < n - 1 else 0)) for i in range(n)]
    # canonical differential blocks: coimage of level i onto image of i+1
    scales = [np.diag(rng.uniform(0.5, 2.0, size=r)) for r in ranks]

    def canonical_diff(i):
        d = np.zeros((dims[i + 1], dims[i]))
        co_start = dims[i] - ranks[i]
        d[:ranks[i], co_start:] = scales[i]
        return d

    T = [_random_orthogonal(rng, d) for d in dims]
    base_diffs = [T[i + 1] @ canonical_diff(i) @ T[i].T for i in range(n - 1)]
    base = FiniteComplex(dims, base_diffs)

    # reduced complex: drop a subset of coimage coordinates together with
    # the matching image coordinates one level up
    drop = [rng.random(int(r)) < 0.4 for r in ranks]
    keep_masks = []
    for i in range(n):
        mask = np.ones(dims[i], dtype=bool)
        if i > 0:  # image block comes first
            mask[:ranks[i - 1]] = ~drop[i - 1]
        if i < n - 1:  # coimage block comes last
            mask[dims[i] - ranks[i]:] = ~drop[i]
        keep_masks.append(mask)
    rdims = [int(m.sum()) for m in keep_masks]
    That = [_random_orthogonal(rng, d) for d in rdims]
    red_diffs, exts, reds = [], [], []
    for i in range(n):
        sel = np.eye(dims[i])[:, keep_masks[i]]
        exts.append(T[i] @ sel @ That[i].T)
        reds.append(That[i] @ sel.T @ T[i].T)
    for i in range(n - 1):
        d_can = canonical_diff(i)[keep_masks[i + 1]][:, keep_masks[i]]
        red_diffs.append(That[i + 1] @ d_can @ That[i].T)
    reduced = FiniteComplex(rdims, red_diffs)
    maps_reduced = MorphismPair(exts, reds, small=reduced, big=base)

    # enhanced complex: append an exact complement chain
    crank = rng.integers(1, 3, size=n - 1)
    cdims = [int((crank[i - 1] if i > 0 else 0) + (crank[i] if i < n - 1 else 0))
             for i in range(n)]
    cscale = [np.diag(rng.uniform(0.5, 2.0, size=r)) for r in crank]

    def comp_diff(i):
        d = np.zeros((cdims[i + 1], cdims[i]))
        co_start = cdims[i] - crank[i]
        d[:crank[i], co_start:] = cscale[i]
        return d

    vdims = [dims[i] + cdims[i] for i in range(n)]
    Tv = [_random_orthogonal(rng, d) for d in vdims]
    enh_diffs, v_exts, v_reds = [], [], []
    for i in range(n):
        inj = np.zeros((vdims[i], dims[i]))
        inj[:dims[i], :] = np.eye(dims[i])
        v_exts.append(Tv[i] @ inj @ T[i].T)
        v_reds.append(T[i] @ inj.T @ Tv[i].T)
    for i in range(n - 1):
        enh_diffs.append(Tv[i + 1] @ _block_diag(canonical_diff(i), comp_diff(i))
                         @ Tv[i].T)
    enhanced = FiniteComplex(vdims, enh_diffs)
    maps_enhanced = MorphismPair(v_exts, v_reds, small=base, big=enhanced)

    return RandomInstance(base, reduced, enhanced, maps_reduced, maps_enhanced,
                          tuple(int(h) for h in harm))
