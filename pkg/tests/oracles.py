"""Independent oracles shared by the test modules."""
import numpy as np
from scipy.stats import rankdata


def permutation_p(groups, shuffles=20_000, seed=0):
    """Monte-Carlo permutation p-value of the tie-corrected Kruskal-Wallis H."""
    rng = np.random.default_rng(seed)
    pooled = np.concatenate([np.asarray(g, float) for g in groups])
    sizes = np.array([len(g) for g in groups])
    n = pooled.size
    ranks = rankdata(pooled)
    _, counts = np.unique(pooled, return_counts=True)
    corr = 1.0 - np.sum(counts ** 3 - counts) / (n ** 3 - n)
    labels = np.repeat(np.arange(len(groups)), sizes)

    def h_of(rank_matrix):
        sums = np.stack([rank_matrix[:, labels == g].sum(axis=1) for g in range(len(groups))], axis=1)
        return (12.0 / (n * (n + 1)) * np.sum(sums ** 2 / sizes, axis=1) - 3.0 * (n + 1)) / corr

    observed = h_of(ranks[None, :])[0]
    perms = rng.permuted(np.tile(ranks, (shuffles, 1)), axis=1)
    hs = h_of(perms)
    return float(np.mean(hs >= observed - 1e-9))


def small_fixtures(count=20, seed=2024):
    """Reproducible k-group fixtures with N <= 30, some tied, some shifted."""
    rng = np.random.default_rng(seed)
    out = []
    for f in range(count):
        k = 2 + f % 3
        sizes = rng.integers(6, 11, size=k)
        while sizes.sum() > 30:
            sizes[np.argmax(sizes)] -= 1
        groups = []
        for g, size in enumerate(sizes):
            shift = 0.6 * g * (f % 4) / 3
            values = rng.normal(shift, 1.0, size)
            if f % 5 == 0:
                values = np.round(values * 2) / 2  # introduce ties
            groups.append(values.tolist())
        out.append(groups)
    return out
