"""Dictionary learning and lasso encoding of dense word vectors.

Three objective variants over signals x_i (the embedding of word i):

  sc1  mean_i [ 0.5*||x_i - D a_i||^2 + lam*||a_i||_1 ],
       dictionary columns constrained to the unit l2 ball;
  sc3  same data term plus tau*||D||_F^2 instead of the norm constraint;
  sc4  sc3 with the codes constrained to be nonnegative.

The per-word sparse step is an l1-regularized least-squares problem solved
by cyclic coordinate descent on precomputed covariance statistics; the
dictionary step is block coordinate descent over columns on accumulated
sufficient statistics. Every solver output carries an exact KKT
certificate, checkable with :func:`kkt_violation`.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

VARIANTS = ("sc1", "sc3", "sc4")

# Coefficients below this magnitude are stored as exact zeros.
NONZERO_EPS = 1e-10

# Internal stationarity target; stricter than the 1e-6 certificate so
# emitted codes pass it with margin.
_KKT_TOL = 1e-7


def _default_sweeps(m: int) -> int:
    # 10*m sweeps, floored: tiny overcomplete problems have singular Grams
    # and need a few hundred sweeps regardless of m.
    return max(10 * m, 1000)


class SparseCodingError(ValueError):
    """Invalid configuration or degenerate input."""


class LassoConvergenceError(RuntimeError):
    """Coordinate descent exhausted its sweep budget.

    Carries the last iterate and the residual correlations so callers can
    inspect how far from stationarity the solve stopped.
    """

    def __init__(self, message, alpha=None, residual=None):
        super().__init__(message)
        self.alpha = alpha
        self.residual = residual


@dataclass
class SparseCodingConfig:
    variant: str = "sc1"
    m: int = 1024
    lam: float = 0.1
    tau: float = 1e-5
    epochs: int = 10
    batch_size: int = 256
    seed: int = 42
    tolerance: float = 1e-7

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise SparseCodingError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.m < 1:
            raise SparseCodingError("m must be >= 1")
        if not self.lam > 0:
            raise SparseCodingError("lambda must be > 0")
        if self.tau < 0:
            raise SparseCodingError("tau must be >= 0")
        if self.epochs < 1 or self.batch_size < 1:
            raise SparseCodingError("epochs and batch_size must be >= 1")
        if not self.tolerance > 0:
            raise SparseCodingError("tolerance must be > 0")

    @property
    def nonneg(self) -> bool:
        return self.variant == "sc4"


@dataclass
class Dictionary:
    """Learned basis matrix with the settings it was trained under.

    ``atoms`` has shape (k, m): column j is basis vector j. For sc1 every
    column has l2 norm at most 1. ``objectives`` holds the per-epoch
    objective trace when produced by :func:`learn_dictionary`.
    """

    atoms: np.ndarray
    variant: str
    lam: float
    tau: float
    objectives: list = field(default=None, repr=False)

    def __post_init__(self):
        self.atoms = np.asarray(self.atoms, dtype=np.float64)
        if self.atoms.ndim != 2 or self.atoms.shape[1] < 1:
            raise SparseCodingError("dictionary must be a k x m matrix with m >= 1")
        if not np.all(np.isfinite(self.atoms)):
            raise SparseCodingError("dictionary contains non-finite values")
        if self.variant not in VARIANTS:
            raise SparseCodingError(f"unknown variant {self.variant!r}")

    @property
    def k(self) -> int:
        return self.atoms.shape[0]

    @property
    def m(self) -> int:
        return self.atoms.shape[1]


class SparseCodes:
    """Per-word sparse coefficient vectors aligned to a vocabulary.

    Each entry is an (indices, values) pair with strictly increasing
    indices and nonzero finite values.
    """

    def __init__(self, words, entries, m):
        if len(words) != len(entries):
            raise SparseCodingError("words and entries differ in length")
        if m < 1:
            raise SparseCodingError("m must be >= 1")
        self.words = list(words)
        self.m = int(m)
        self.entries = []
        self._by_word = {}
        for word, (idx, val) in zip(self.words, entries):
            idx = np.asarray(idx, dtype=np.int64)
            val = np.asarray(val, dtype=np.float64)
            if idx.shape != val.shape or idx.ndim != 1:
                raise SparseCodingError(f"bad sparse entry for {word!r}")
            if idx.size:
                if np.any(np.diff(idx) <= 0):
                    raise SparseCodingError(f"indices not strictly increasing for {word!r}")
                if idx[0] < 0 or idx[-1] >= m:
                    raise SparseCodingError(f"index out of range for {word!r}")
                if not np.all(np.isfinite(val)) or np.any(val == 0.0):
                    raise SparseCodingError(f"zero or non-finite coefficient for {word!r}")
            self.entries.append((idx, val))
            if word in self._by_word:
                raise SparseCodingError(f"duplicate word {word!r}")
            self._by_word[word] = (idx, val)

    def __len__(self):
        return len(self.words)

    def __contains__(self, word):
        return word in self._by_word

    def get(self, word, lowercase_fallback=False):
        entry = self._by_word.get(word)
        if entry is None and lowercase_fallback:
            entry = self._by_word.get(word.lower())
        return entry

    def total_nonzeros(self) -> int:
        return sum(idx.size for idx, _ in self.entries)

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((len(self.words), self.m))
        for row, (idx, val) in enumerate(self.entries):
            dense[row, idx] = val
        return dense


@dataclass
class BasisReport:
    """Per-basis l2 norms and usage frequencies, plus their correlation."""

    norms: np.ndarray
    frequencies: np.ndarray
    correlation: float


def _sparsify(vector, threshold=NONZERO_EPS):
    idx = np.nonzero(np.abs(vector) >= threshold)[0]
    return idx.astype(np.int64), vector[idx].copy()


def _kkt_violation_rows(grad, alpha, lam, nonneg):
    """Max stationarity violation per row; grad = D^T (x - D alpha)."""
    if nonneg:
        on_zero = np.where(alpha > 0, 0.0, np.maximum(grad - lam, 0.0))
        on_support = np.where(alpha > 0, np.abs(grad - lam), 0.0)
    else:
        on_zero = np.where(alpha != 0, 0.0, np.maximum(np.abs(grad) - lam, 0.0))
        on_support = np.where(alpha != 0, np.abs(grad - lam * np.sign(alpha)), 0.0)
    return np.maximum(on_zero, on_support).max(axis=1)


def kkt_violation(D, x, alpha, lam, nonneg=False):
    """Stationarity certificate for a lasso solution.

    Zero coordinates must satisfy |d_j^T r| <= lam (one-sided
    d_j^T r <= lam under nonnegativity) and support coordinates
    d_j^T r = lam * sign(alpha_j), where r = x - D alpha. Returns the
    maximum violation across coordinates.
    """
    D = np.asarray(D, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    grad = D.T @ (x - D @ alpha)
    return float(_kkt_violation_rows(grad[None, :], alpha[None, :], lam, nonneg)[0])


def lasso_objective(D, x, alpha, lam):
    r = x - D @ alpha
    return 0.5 * float(r @ r) + lam * float(np.abs(alpha).sum())


def _quad_objective_row(gram, c_row, alpha_row, lam):
    """Per-row objective up to the constant 0.5*||x||^2."""
    return (
        0.5 * float(alpha_row @ (gram @ alpha_row))
        - float(c_row @ alpha_row)
        + lam * float(np.abs(alpha_row).sum())
    )


def _optimize_signed_set(gram, c_row, alpha, theta, lam, nonneg):
    """Inner phase: stationary sign-consistent point on the signed set.

    Solves the equality system on the active coordinates; a consistent,
    sign-consistent solution is taken outright, otherwise the move is cut
    at a sign crossing (which removes at least one coordinate) and the
    solve repeats. The active set shrinks monotonically, so this ends in
    at most |active| passes. Returns the updated (alpha, theta) or None
    when floating-point degeneracy blocks progress.
    """
    alpha = alpha.copy()
    theta = theta.copy()
    for _ in range(c_row.size + 2):
        active = np.nonzero(theta != 0.0)[0]
        if active.size == 0:
            return alpha, theta
        sub = gram[np.ix_(active, active)]
        target = c_row[active] - lam * theta[active]
        solution = np.linalg.lstsq(sub, target, rcond=None)[0]
        current = alpha[active]
        gap = target - sub @ solution
        if np.max(np.abs(gap)) > 1e-9 * max(1.0, float(np.max(np.abs(target)))):
            # No stationary point with these signs: the fixed-sign model
            # descends along this (numerical) null direction, so ride it
            # to the first sign crossing and drop what it zeroes.
            crossing = current * gap < 0.0
            if not crossing.any():
                return None
            tau = float(np.min(-current[crossing] / gap[crossing]))
            point = current + tau * gap
        else:
            sign_ok = np.sign(solution) == theta[active]
            if nonneg:
                sign_ok &= solution >= 0.0
            if sign_ok.all():
                alpha[active] = solution
                return alpha, theta
            # Cut the move at the first sign crossing. A just-activated
            # coordinate starts at exactly zero and does not count.
            move = solution - current
            crossing = (current * solution < 0.0) | ((solution == 0.0) & (current != 0.0))
            if not crossing.any():
                return None
            taus = current[crossing] / (current[crossing] - solution[crossing])
            tau = float(np.clip(np.min(taus), 0.0, 1.0))
            point = current + tau * move
        point[np.abs(point) < 1e-14] = 0.0
        if np.count_nonzero(point) >= active.size:
            point[np.argmin(np.abs(point))] = 0.0
        alpha[active] = point
        theta = np.sign(alpha)
    return None


def _polish_row(gram, c_row, alpha_row, lam, nonneg):
    """Active-set finisher for one lasso problem, Lawson-Hanson style.

    Cyclic updates crawl when near-parallel atoms trade mass or a
    coordinate leaves the support slowly. Once a row stalls we alternate
    two phases: optimize exactly over the current signed active set, then
    check the full stationarity conditions and admit the worst violating
    coordinate. The result is accepted only when it passes the KKT
    certificate and is no worse than the iterate it started from; any
    degenerate failure just returns the row to coordinate descent.
    Returns (alpha, residual correlations) or (None, None).
    """
    alpha = alpha_row.copy()
    theta = np.sign(alpha)
    start_obj = _quad_objective_row(gram, c_row, alpha_row, lam)
    best_obj = np.inf
    for _ in range(4 * c_row.size + 16):
        inner = _optimize_signed_set(gram, c_row, alpha, theta, lam, nonneg)
        if inner is None:
            return None, None
        alpha, theta = inner
        obj = _quad_objective_row(gram, c_row, alpha, lam)
        if obj >= best_obj:
            return None, None  # degenerate cycling: no strict progress
        best_obj = obj
        resid = c_row - gram @ alpha
        if _kkt_violation_rows(resid[None, :], alpha[None, :], lam, nonneg)[0] <= _KKT_TOL:
            if obj <= start_obj:
                return alpha, resid
            return None, None
        violation = resid - lam if nonneg else np.abs(resid) - lam
        violation = np.where(alpha == 0.0, violation, -np.inf)
        worst = int(np.argmax(violation))
        if violation[worst] <= 0.0:
            return None, None  # support-side violation the solve cannot fix
        theta[worst] = 1.0 if (nonneg or resid[worst] > 0) else -1.0
    return None, None


def _lasso_cd_batch(gram, ctx, lam, nonneg, tol, max_sweeps, warm=None):
    """Cyclic coordinate descent on rows of ctx = X_batch @ D.

    Rows are independent problems sharing the Gram matrix; each is frozen
    once its sweep-level coordinate change drops below ``tol`` and an
    exact stationarity recheck (or a certified support polish) passes.
    Raises on sweep exhaustion.
    """
    n_rows, m = ctx.shape
    diag = np.ascontiguousarray(np.diag(gram))
    usable = diag > 0.0
    if warm is None:
        alpha = np.zeros((n_rows, m))
        grad = ctx.copy()
    else:
        alpha = warm.copy()
        grad = ctx - alpha @ gram
    active = np.arange(n_rows)
    max_delta = np.zeros(n_rows)
    for sweep in range(max_sweeps):
        if active.size == 0:
            break
        max_delta[active] = 0.0
        for j in range(m):
            if not usable[j]:
                continue
            rho = grad[active, j] + diag[j] * alpha[active, j]
            if nonneg:
                new = np.maximum(rho - lam, 0.0) / diag[j]
            else:
                new = np.sign(rho) * np.maximum(np.abs(rho) - lam, 0.0) / diag[j]
            delta = new - alpha[active, j]
            changed = np.nonzero(delta)[0]
            if changed.size:
                rows = active[changed]
                alpha[rows, j] = new[changed]
                grad[rows] -= delta[changed, None] * gram[j][None, :]
                np.maximum.at(max_delta, rows, np.abs(delta[changed]))
        # Zigzags between correlated coordinates can keep per-sweep deltas
        # just above tol indefinitely, so force a recheck periodically.
        settled = max_delta[active] < tol
        if sweep % 50 == 49:
            settled = np.ones(active.size, dtype=bool)
        if settled.any():
            cand = active[settled]
            fresh = ctx[cand] - alpha[cand] @ gram
            grad[cand] = fresh
            ok = _kkt_violation_rows(fresh, alpha[cand], lam, nonneg) <= _KKT_TOL
            for pos in np.nonzero(~ok)[0]:
                row = cand[pos]
                polished, polished_grad = _polish_row(
                    gram, ctx[row], alpha[row], lam, nonneg
                )
                if polished is not None:
                    alpha[row] = polished
                    grad[row] = polished_grad
                    ok[pos] = True
            active = np.sort(np.concatenate([active[~settled], cand[~ok]]))
    if active.size:
        residual = ctx[active] - alpha[active] @ gram
        raise LassoConvergenceError(
            f"lasso failed to converge for {active.size} signal(s) "
            f"within {max_sweeps} sweeps",
            alpha=alpha[active],
            residual=residual,
        )
    return alpha


def solve_lasso(D, x, lam, nonneg=False, tol=1e-7, max_sweeps=None, warm_start=None):
    """Minimize 0.5*||x - D a||^2 + lam*||a||_1 (a >= 0 when nonneg).

    Cyclic coordinate descent over coordinates in ascending order with
    covariance updates; stops when the largest coordinate change in a
    sweep falls below ``tol`` and the KKT conditions hold. The default
    sweep cap is 10*m.
    """
    D = np.asarray(D, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if D.ndim != 2 or x.ndim != 1 or D.shape[0] != x.shape[0]:
        raise SparseCodingError("dictionary/signal shape mismatch")
    if not (np.all(np.isfinite(D)) and np.all(np.isfinite(x))):
        raise SparseCodingError("non-finite input to solve_lasso")
    if not lam > 0:
        raise SparseCodingError("lambda must be > 0")
    m = D.shape[1]
    if max_sweeps is None:
        max_sweeps = _default_sweeps(m)
    gram = D.T @ D
    ctx = (x @ D)[None, :]
    warm = None if warm_start is None else np.asarray(warm_start, dtype=np.float64)[None, :]
    alpha = _lasso_cd_batch(gram, ctx, lam, nonneg, tol, max_sweeps, warm=warm)
    return alpha[0]


def _dictionary_pass(D, A, B, variant, tau, n_signals):
    """One block-coordinate pass over dictionary columns.

    Each column update is the exact minimizer of the accumulated
    quadratic: projection onto the unit l2 ball for sc1, ridge-shrunk
    least squares for sc3/sc4. Unused columns (A_jj = 0) are left alone
    for sc1 and shrink toward zero under the ridge term otherwise.
    """
    m = D.shape[1]
    diag_a = np.ascontiguousarray(np.diag(A))
    ridge = 2.0 * tau * n_signals
    for j in range(m):
        ajj = diag_a[j]
        if variant == "sc1":
            if ajj <= 0.0:
                continue
            u = D[:, j] + (B[:, j] - D @ A[:, j]) / ajj
            norm = math.sqrt(float(u @ u))
            if norm > 1.0:
                u = u / norm
            D[:, j] = u
        else:
            denom = ajj + ridge
            if denom <= 0.0:
                continue
            D[:, j] = (B[:, j] - D @ A[:, j] + ajj * D[:, j]) / denom


def _objective_from_stats(D, A, B, sum_sq, l1_sum, lam, tau, variant, n_signals):
    """Mean-per-signal objective from accumulated sufficient statistics."""
    quad = sum_sq - 2.0 * float(np.sum(D * B)) + float(np.sum((D.T @ D) * A))
    obj = 0.5 * quad / n_signals + lam * l1_sum / n_signals
    if variant != "sc1":
        obj += tau * float(np.sum(D * D))
    return obj


def _init_dictionary(X, m, variant, rng):
    """Seeded Gaussian columns; unit-norm for sc1; dead columns re-seeded."""
    n, k = X.shape
    D = rng.standard_normal((k, m))
    norms = np.linalg.norm(D, axis=0)
    for j in np.nonzero(norms == 0.0)[0]:
        D[:, j] = X[rng.integers(n)]
    if variant == "sc1":
        norms = np.linalg.norm(D, axis=0)
        D /= np.maximum(norms, 1e-300)
    return D


def _batch_slices(n, batch_size):
    return [(b, min(b + batch_size, n)) for b in range(0, n, batch_size)]


def learn_dictionary(table, config: SparseCodingConfig):
    """Alternating optimization of the configured variant's objective.

    Per epoch: every word's code is re-solved against the epoch-start
    dictionary (warm-started from the previous epoch) while sufficient
    statistics A = sum a a^T and B = sum x a^T accumulate per mini-batch;
    the dictionary then takes one block-coordinate pass per processed
    mini-batch. Both half-steps are exact minimizations, so the epoch
    objective trace is non-increasing. A final sparse refit against the
    finished dictionary produces the returned codes.

    Returns (Dictionary, SparseCodes); the Dictionary carries the
    objective trace (one value per epoch plus the final refit).
    """
    X = np.asarray(table.vectors, dtype=np.float64)
    if not np.any(X):
        raise SparseCodingError("embedding table is all zeros; nothing to learn")
    n, k = X.shape
    m = config.m
    rng = np.random.default_rng(config.seed)
    D = _init_dictionary(X, m, config.variant, rng)
    sum_sq = float(np.sum(X * X))
    slices = _batch_slices(n, config.batch_size)
    max_sweeps = _default_sweeps(m)
    warm_entries = [None] * n
    objectives = []

    def sparse_pass(current_d, epoch_label):
        gram = current_d.T @ current_d
        A = np.zeros((m, m))
        B = np.zeros((k, m))
        l1_sum = 0.0
        codes = [None] * n
        for lo, hi in slices:
            Xb = X[lo:hi]
            ctx = Xb @ current_d
            warm = np.zeros((hi - lo, m))
            for row, i in enumerate(range(lo, hi)):
                ent = warm_entries[i]
                if ent is not None:
                    warm[row, ent[0]] = ent[1]
            alpha = _lasso_cd_batch(
                gram, ctx, config.lam, config.nonneg, config.tolerance, max_sweeps, warm=warm
            )
            if not np.all(np.isfinite(alpha)):
                raise SparseCodingError(f"non-finite codes during {epoch_label}")
            A += alpha.T @ alpha
            B += Xb.T @ alpha
            l1_sum += float(np.abs(alpha).sum())
            for row, i in enumerate(range(lo, hi)):
                ent = _sparsify(alpha[row], threshold=0.0)
                warm_entries[i] = ent
                codes[i] = ent
        return A, B, l1_sum, codes

    for epoch in range(1, config.epochs + 1):
        A, B, l1_sum, _ = sparse_pass(D, f"epoch {epoch}")
        for _ in slices:
            _dictionary_pass(D, A, B, config.variant, config.tau, n)
        if not np.all(np.isfinite(D)):
            raise SparseCodingError(f"non-finite dictionary after epoch {epoch}")
        obj = _objective_from_stats(
            D, A, B, sum_sq, l1_sum, config.lam, config.tau, config.variant, n
        )
        if not math.isfinite(obj):
            raise SparseCodingError(f"objective diverged at epoch {epoch}")
        objectives.append(obj)

    A, B, l1_sum, raw_codes = sparse_pass(D, "final refit")
    objectives.append(
        _objective_from_stats(D, A, B, sum_sq, l1_sum, config.lam, config.tau, config.variant, n)
    )
    entries = []
    for idx, val in raw_codes:
        keep = np.abs(val) >= NONZERO_EPS
        entries.append((idx[keep], val[keep]))
    dictionary = Dictionary(
        atoms=D,
        variant=config.variant,
        lam=config.lam,
        tau=config.tau,
        objectives=objectives,
    )
    codes = SparseCodes(table.words, entries, m)
    return dictionary, codes


def _thread_count() -> int:
    raw = os.environ.get("SPARSETAG_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def encode(dictionary: Dictionary, table, tol=1e-7) -> SparseCodes:
    """Sparse-code every table row against a fixed dictionary.

    Uses the dictionary's own lambda and variant. Words are chunked and
    may be solved on SPARSETAG_THREADS worker threads; chunks are
    independent, so the result does not depend on scheduling.
    """
    X = np.asarray(table.vectors, dtype=np.float64)
    if X.shape[1] != dictionary.k:
        raise SparseCodingError(
            f"dimension mismatch: table k={X.shape[1]}, dictionary k={dictionary.k}"
        )
    D = dictionary.atoms
    m = dictionary.m
    gram = D.T @ D
    nonneg = dictionary.variant == "sc4"
    max_sweeps = _default_sweeps(m)
    slices = _batch_slices(X.shape[0], 512)

    def solve_chunk(bounds):
        lo, hi = bounds
        alpha = _lasso_cd_batch(
            gram, X[lo:hi] @ D, dictionary.lam, nonneg, tol, max_sweeps
        )
        return [_sparsify(alpha[r]) for r in range(alpha.shape[0])]

    threads = _thread_count()
    if threads > 1 and len(slices) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunk_results = list(pool.map(solve_chunk, slices))
    else:
        chunk_results = [solve_chunk(b) for b in slices]
    entries = [entry for chunk in chunk_results for entry in chunk]
    return SparseCodes(table.words, entries, m)


def sparsity_level(codes: SparseCodes, m: int) -> float:
    """Fraction of zero entries in the code matrix: 1 - nnz/(m*|V|)."""
    if m < 1:
        raise SparseCodingError("m must be >= 1")
    if len(codes) == 0:
        return 1.0
    return 1.0 - codes.total_nonzeros() / (m * len(codes))


def basis_statistics(dictionary: Dictionary, codes: SparseCodes) -> BasisReport:
    """Per-basis l2 norm, usage frequency, and their Pearson correlation."""
    m = dictionary.m
    if codes.m != m:
        raise SparseCodingError(f"codes have m={codes.m}, dictionary m={m}")
    norms = np.linalg.norm(dictionary.atoms, axis=0)
    counts = np.zeros(m)
    for idx, _ in codes.entries:
        counts[idx] += 1.0
    frequencies = counts / len(codes) if len(codes) else counts
    correlation = _pearson(norms, frequencies)
    return BasisReport(norms=norms, frequencies=frequencies, correlation=correlation)


def _pearson(a, b) -> float:
    """Pearson correlation; 0.0 when either side has no variance."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    da = a - a.mean()
    db = b - b.mean()
    denom = math.sqrt(float(da @ da) * float(db @ db))
    if denom < 1e-300:
        return 0.0
    return float(np.clip((da @ db) / denom, -1.0, 1.0))


def save_dictionary(path, dictionary: Dictionary) -> None:
    """Write header `m k variant lambda tau` then one line per basis."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            f"{dictionary.m} {dictionary.k} {dictionary.variant} "
            f"{dictionary.lam:.17g} {dictionary.tau:.17g}\n"
        )
        for j in range(dictionary.m):
            fh.write(" ".join(f"{v:.17g}" for v in dictionary.atoms[:, j]) + "\n")


def load_dictionary(path) -> Dictionary:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 5:
            raise SparseCodingError(f"{path}: bad dictionary header")
        m, k = int(header[0]), int(header[1])
        variant = header[2]
        lam, tau = float(header[3]), float(header[4])
        atoms = np.zeros((k, m))
        for j in range(m):
            fields = fh.readline().split()
            if len(fields) != k:
                raise SparseCodingError(f"{path}: basis {j} has {len(fields)} values, expected {k}")
            atoms[:, j] = [float(v) for v in fields]
    return Dictionary(atoms=atoms, variant=variant, lam=lam, tau=tau)


def save_codes(path, codes: SparseCodes) -> None:
    """One line per word: `word idx:coef ...`, 6 significant digits."""
    with open(path, "w", encoding="utf-8") as fh:
        for word, (idx, val) in zip(codes.words, codes.entries):
            parts = [word] + [f"{i}:{v:.6g}" for i, v in zip(idx, val)]
            fh.write(" ".join(parts) + "\n")


def load_codes(path, m=None) -> SparseCodes:
    """Read a codes file; ``m`` is inferred from the largest index if absent."""
    words = []
    entries = []
    max_idx = -1
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            fields = line.rstrip("\n").split(" ")
            if not fields or not fields[0]:
                raise SparseCodingError(f"{path}:{lineno}: missing word")
            words.append(fields[0])
            idx = []
            val = []
            for part in fields[1:]:
                if not part:
                    continue
                try:
                    i_str, v_str = part.split(":")
                    i, v = int(i_str), float(v_str)
                except ValueError:
                    raise SparseCodingError(f"{path}:{lineno}: bad entry {part!r}") from None
                idx.append(i)
                val.append(v)
            if idx:
                max_idx = max(max_idx, max(idx))
            entries.append((np.array(idx, dtype=np.int64), np.array(val)))
    if m is None:
        m = max(max_idx + 1, 1)
    return SparseCodes(words, entries, m)
