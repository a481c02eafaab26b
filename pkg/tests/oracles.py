"""Independent straight-line reference implementations used by the tests.

Everything here is written as direct loop-based transcriptions of the
model's defining formulas, deliberately sharing no code with the package:
densities come from scipy.stats, sums are explicit, nothing is vectorized
beyond single samples. Tests compare the package against these.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.stats import multivariate_normal


def mixture_densities(x, weights, means, covariances):
    """p(x_i | component l) table, (n, L), via scipy's density."""
    n = x.shape[0]
    L = len(weights)
    dens = np.empty((n, L))
    for l in range(L):
        dens[:, l] = multivariate_normal.pdf(x, mean=means[l], cov=covariances[l])
    return dens.reshape(n, L)


def responsibilities_oracle(x, weights, means, covariances, class_table=None, labels=None):
    """Posterior memberships, optionally tilted by each sample's class column."""
    dens = mixture_densities(x, weights, means, covariances)
    n, L = dens.shape
    gamma = np.empty((n, L))
    for i in range(n):
        row = np.empty(L)
        for l in range(L):
            row[l] = weights[l] * dens[i, l]
            if labels is not None:
                row[l] *= class_table[l, labels[i] - 1]
        gamma[i] = row / row.sum()
    return gamma


def log_likelihood_oracle(xu, xl, labels, weights, means, covariances, class_table):
    """Direct evaluation of the two-term joint log-likelihood."""
    total = 0.0
    if xu.shape[0]:
        dens = mixture_densities(xu, weights, means, covariances)
        for i in range(xu.shape[0]):
            total += math.log(sum(weights[l] * dens[i, l] for l in range(len(weights))))
    if xl.shape[0]:
        dens = mixture_densities(xl, weights, means, covariances)
        for i in range(xl.shape[0]):
            total += math.log(
                sum(
                    weights[l] * dens[i, l] * class_table[l, labels[i] - 1]
                    for l in range(len(weights))
                )
            )
    return total


def m_step_oracle(gamma_u, xu, gamma_l, xl, labels, n_classes, reg_epsilon, smoothing,
                  prev_means=None):
    """Loop transcription of the parameter updates, including the ridge and
    the class-table smoothing the fitted model applies."""
    L = gamma_u.shape[1]
    d = xu.shape[1] if xu.shape[0] else xl.shape[1]
    n_total = xu.shape[0] + xl.shape[0]

    means = np.zeros((L, d))
    denom = np.zeros(L)
    for l in range(L):
        acc = np.zeros(d)
        s = 0.0
        for i in range(xl.shape[0]):
            acc += xl[i] * gamma_l[i, l]
            s += gamma_l[i, l]
        for i in range(xu.shape[0]):
            acc += xu[i] * gamma_u[i, l]
            s += gamma_u[i, l]
        means[l] = acc / s
        denom[l] = s

    covariances = np.zeros((L, d, d))
    for l in range(L):
        center = means[l] if prev_means is None else prev_means[l]
        acc = np.zeros((d, d))
        for i in range(xl.shape[0]):
            diff = xl[i] - center
            acc += np.outer(diff, diff) * gamma_l[i, l]
        for i in range(xu.shape[0]):
            diff = xu[i] - center
            acc += np.outer(diff, diff) * gamma_u[i, l]
        cov = acc / denom[l]
        cov = 0.5 * (cov + cov.T)
        covariances[l] = cov + reg_epsilon * (np.trace(cov) / d) * np.eye(d)

    weights = np.array([denom[l] / n_total for l in range(L)])

    counts = np.zeros((L, n_classes))
    for i in range(xl.shape[0]):
        for l in range(L):
            counts[l, labels[i] - 1] += gamma_l[i, l]
    class_table = np.zeros((L, n_classes))
    for l in range(L):
        row_sum = counts[l].sum()
        for k in range(n_classes):
            class_table[l, k] = (counts[l, k] + smoothing) / (row_sum + n_classes * smoothing)

    return weights, means, covariances, class_table


def gmm_em_oracle(x, weights, means, covariances, n_iter, reg_epsilon):
    """Classical unsupervised GMM EM, run for exactly n_iter updates."""
    weights = weights.copy()
    means = means.copy()
    covariances = covariances.copy()
    n, d = x.shape
    L = len(weights)
    for _ in range(n_iter):
        gamma = responsibilities_oracle(x, weights, means, covariances)
        for l in range(L):
            s = gamma[:, l].sum()
            mu = np.zeros(d)
            for i in range(n):
                mu += gamma[i, l] * x[i]
            mu /= s
            cov = np.zeros((d, d))
            for i in range(n):
                diff = x[i] - mu
                cov += gamma[i, l] * np.outer(diff, diff)
            cov /= s
            cov = 0.5 * (cov + cov.T)
            means[l] = mu
            covariances[l] = cov + reg_epsilon * (np.trace(cov) / d) * np.eye(d)
            weights[l] = s / n
    return weights, means, covariances


def class_proba_oracle(x, weights, means, covariances, class_table):
    """Class probabilities: responsibilities pushed through the class table."""
    gamma = responsibilities_oracle(x, weights, means, covariances)
    n = x.shape[0]
    K = class_table.shape[1]
    proba = np.zeros((n, K))
    for i in range(n):
        for k in range(K):
            proba[i, k] = sum(gamma[i, l] * class_table[l, k] for l in range(len(weights)))
    return proba


def pseudo_selection_oracle(proba, tau, alpha):
    """Threshold, sort, and proportionally cap the per-class candidate lists.

    Returns (candidate lists, n_final, selected entries) where entries are
    (sample index, 1-based class, confidence) in class-major order.
    """
    n, K = proba.shape
    candidates = [[] for _ in range(K)]
    for i in range(n):
        best = 0
        for k in range(1, K):
            if proba[i, k] > proba[i, best]:
                best = k
        xi = proba[i, best]
        if xi > tau:
            candidates[best].append((i, float(xi)))
    for k in range(K):
        candidates[k] = sorted(candidates[k], key=lambda e: (-e[1], e[0]))
    n_final = min(math.floor(alpha * len(candidates[k])) for k in range(K))
    selected = []
    if n_final > 0:
        for k in range(K):
            for i, xi in candidates[k][:n_final]:
                selected.append((i, k + 1, xi))
    return candidates, n_final, selected


def softmax_oracle(scores):
    out = np.empty_like(scores)
    for i in range(scores.shape[0]):
        e = np.exp(scores[i] - scores[i].max())
        out[i] = e / e.sum()
    return out


def finite_difference_grad(fun, params, h=1e-4):
    """Central finite differences of a scalar function of a flat vector."""
    grad = np.zeros_like(params)
    for j in range(params.size):
        plus = params.copy()
        minus = params.copy()
        plus[j] += h
        minus[j] -= h
        grad[j] = (fun(plus) - fun(minus)) / (2.0 * h)
    return grad


def pca_eigen_oracle(x):
    """Full eigendecomposition of the sample covariance through SVD of the
    centered data (an independent route to the same eigenpairs)."""
    centered = x - x.mean(axis=0)
    _, singular, vt = np.linalg.svd(centered, full_matrices=False)
    eigenvalues = singular**2 / (x.shape[0] - 1)
    return eigenvalues, vt
