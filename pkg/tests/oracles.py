"""Independent reference computations for the test suite.

Nothing here imports the package's numeric code: beliefs are plain lists,
posteriors come from explicit enumeration with ``fractions.Fraction`` where
exactness matters, and the flight consistency set is built by a direct
per-vector loop.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction


def enumerate_posterior_value(b, tables, U, q):
    """sum_y p(y) * max_a sum_theta b_y(theta) U(theta, a), by explicit Bayes.

    ``tables[q][theta][y]`` is p(y | q, theta); ``U[theta][a]``.
    """
    n = len(b)
    n_answers = len(tables[q][0])
    n_actions = len(U[0])
    total = 0.0
    for y in range(n_answers):
        joint = [b[t] * tables[q][t][y] for t in range(n)]
        p_y = sum(joint)
        if p_y <= 0:
            continue
        post = [j / p_y for j in joint]
        best = max(sum(post[t] * U[t][a] for t in range(n)) for a in range(n_actions))
        total += p_y * best
    return total


def enumerate_value(b, U):
    return max(sum(b[t] * U[t][a] for t in range(len(b))) for a in range(len(U[0])))


def enumerate_posteriors(b, tables, q):
    """[(p_y, posterior list)] for every answer with positive marginal."""
    n = len(b)
    out = []
    for y in range(len(tables[q][0])):
        joint = [b[t] * tables[q][t][y] for t in range(n)]
        p_y = sum(joint)
        if p_y > 0:
            out.append((p_y, [j / p_y for j in joint]))
    return out


def exact_bayes(prior, column):
    """Bayes update in rational arithmetic."""
    prior = [Fraction(p) for p in prior]
    joint = [p * Fraction(c) for p, c in zip(prior, column)]
    z = sum(joint)
    return [j / z for j in joint]


def entropy_bits(p):
    return -sum(x * math.log2(x) for x in p if x > 0)


def mutual_information(b, table):
    """I(theta; y) for one question, from the definition H(y) - H(y | theta)."""
    n_answers = len(table[0])
    marg = [sum(b[t] * table[t][y] for t in range(len(b))) for y in range(n_answers)]
    cond = sum(b[t] * entropy_bits(table[t]) for t in range(len(b)))
    return entropy_bits(marg) - cond


def flight_consistency_set(support_rounds):
    """Indices (product order over (-1, 0, 1)^8) of weight vectors consistent with every choice.

    A choice is consistent when the chosen option's score is maximal (ties
    count as consistent), checked vector by vector in plain Python.
    """
    keep = []
    for idx, w in enumerate(itertools.product((-1, 0, 1), repeat=8)):
        ok = True
        for options, chosen in support_rounds:
            scores = [sum(wi * xi for wi, xi in zip(w, opt)) for opt in options]
            if scores[chosen] < max(scores) - 1e-12:
                ok = False
                break
        if ok:
            keep.append(idx)
    return keep


def toy_dialogue_tree(prior_a, stakes, cost, separating=True):
    """Expected net utility of asking the separating question once vs committing now."""
    commit_now = stakes * max(prior_a, 1 - prior_a)
    ask = stakes * 1.0 - cost if separating else commit_now - cost
    return commit_now, ask
