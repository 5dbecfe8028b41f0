"""How much of the training text the generator copies."""
from collections import Counter


def _ngrams(tokens, n):
    return {tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1)}


def longest_shared_ngram(sample_tokens, train_ngrams, train_max_len):
    """Length of the longest contiguous token run of ``sample_tokens`` found in training text.

    ``train_ngrams(n)`` returns the set of training n-grams. Shared n-grams
    are downward closed, so we grow n until nothing is shared.
    """
    best = 0
    for n in range(1, min(len(sample_tokens), train_max_len) + 1):
        if _ngrams(sample_tokens, n) & train_ngrams(n):
            best = n
        else:
            break
    return best


def memorization_report(train, synthetic):
    """Exact-duplicate rate and per-sample longest common token n-gram with any training doc.

    Tokens are whitespace-separated words. Returns
    {"exact_dup_rate", "overlap": [per-sample lengths], "histogram": {len: count}}.
    """
    train_texts = train.texts if hasattr(train, "texts") else list(train)
    syn_texts = synthetic.texts if hasattr(synthetic, "texts") else list(synthetic)
    if not train_texts or not syn_texts:
        raise ValueError("memorization_report needs non-empty train and synthetic sets")
    known = set(train_texts)
    train_toks = [t.split() for t in train_texts]
    max_len = max(len(t) for t in train_toks)
    cache = {}

    def train_ngrams(n):
        if n not in cache:
            grams = set()
            for toks in train_toks:
                grams |= _ngrams(toks, n)
            cache[n] = grams
        return cache[n]

    overlap = [longest_shared_ngram(t.split(), train_ngrams, max_len) for t in syn_texts]
    hist = Counter(overlap)
    return {
        "exact_dup_rate": sum(t in known for t in syn_texts) / len(syn_texts),
        "overlap": overlap,
        "histogram": {int(k): hist[k] for k in sorted(hist)},
        "mean_overlap": sum(overlap) / len(overlap),
    }
