"""Independent brute-force solvers used to pin expected test values.

These deliberately share no code paths with the package: the lasso oracle
enumerates supports and sign patterns, the CRF oracle enumerates every
label path, and gradients are checked by central finite differences.
"""

import itertools

import numpy as np


def lasso_objective(D, x, alpha, lam):
    r = x - D @ alpha
    return 0.5 * float(r @ r) + lam * float(np.abs(alpha).sum())


def lasso_bruteforce(D, x, lam, nonneg=False):
    """Global lasso minimum by exhaustive support enumeration.

    For every support the stationarity system is solved per sign pattern
    (least squares shifted by lam * sign); sign-consistent solutions are
    feasible points, so the best of them (against the zero vector) is the
    optimum. Intended for m <= ~10.
    """
    k, m = D.shape
    gram = D.T @ D
    corr = D.T @ x
    best_alpha = np.zeros(m)
    best_obj = lasso_objective(D, x, best_alpha, lam)
    for size in range(1, m + 1):
        for support in itertools.combinations(range(m), size):
            sub = list(support)
            A = gram[np.ix_(sub, sub)]
            if nonneg:
                signs = np.ones((1, size))
            else:
                signs = np.array(list(itertools.product((-1.0, 1.0), repeat=size)))
            rhs = corr[sub][None, :] - lam * signs
            try:
                sols = np.linalg.solve(A, rhs.T).T
            except np.linalg.LinAlgError:
                continue
            consistent = np.all(np.sign(sols) == signs, axis=1)
            for sol in sols[consistent]:
                alpha = np.zeros(m)
                alpha[sub] = sol
                obj = lasso_objective(D, x, alpha, lam)
                if obj < best_obj:
                    best_obj = obj
                    best_alpha = alpha
    return best_alpha, best_obj


def crf_enumerate(emissions, transitions):
    """Exact logZ, marginals and best path by scoring every label sequence."""
    emissions = np.asarray(emissions, dtype=np.float64)
    transitions = np.asarray(transitions, dtype=np.float64)
    n_pos, n_lab = emissions.shape
    paths = list(itertools.product(range(n_lab), repeat=n_pos))
    scores = np.empty(len(paths))
    for p_idx, path in enumerate(paths):
        s = emissions[0][path[0]]
        for t in range(1, n_pos):
            s += transitions[path[t - 1]][path[t]] + emissions[t][path[t]]
        scores[p_idx] = s
    mx = scores.max()
    logz = float(mx + np.log(np.exp(scores - mx).sum()))
    probs = np.exp(scores - logz)
    unary = np.zeros((n_pos, n_lab))
    pairwise = np.zeros((max(n_pos - 1, 0), n_lab, n_lab))
    for path, pr in zip(paths, probs):
        for t, y in enumerate(path):
            unary[t, y] += pr
        for t in range(1, n_pos):
            pairwise[t - 1, path[t - 1], path[t]] += pr
    best = list(paths[int(np.argmax(scores))])
    return logz, unary, pairwise, best, float(mx)


def finite_difference_gradient(fun, params, h=1e-5):
    """Central differences of a scalar function, coordinate by coordinate."""
    grad = np.zeros_like(params)
    for i in range(params.size):
        up = params.copy()
        up[i] += h
        down = params.copy()
        down[i] -= h
        grad[i] = (fun(up) - fun(down)) / (2.0 * h)
    return grad


def random_bio_sequence(rng, length, types=("PER", "LOC", "ORG", "MISC")):
    """A well-formed BIO tag sequence with random span layout."""
    tags = []
    while len(tags) < length:
        if rng.random() < 0.5:
            tags.append("O")
        else:
            etype = types[int(rng.integers(len(types)))]
            span = min(int(rng.integers(1, 4)), length - len(tags))
            tags.append("B-" + etype)
            tags.extend(["I-" + etype] * (span - 1))
    return tags
