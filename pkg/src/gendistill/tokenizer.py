"""Byte-pair-encoding subword vocabulary learned from the training text.

Words are split on Unicode whitespace and each word is followed by an
end-of-word symbol (``EOW``), which BPE is free to merge into the word's last
piece. Decoding turns ``EOW`` back into a single space, so any text whose
words are separated by single spaces round-trips exactly.
"""
import heapq
import json
import unicodedata
from collections import Counter, defaultdict
from dataclasses import dataclass

EOW = "▁"
SPECIALS = ("<pad>", "<bos>", "<eos>", "<unk>")
PAD, BOS, EOS, UNK = range(4)
FORMAT = "gendistill-bpe/1"


class VocabError(ValueError):
    pass


@dataclass(frozen=True)
class TokenSeq:
    ids: tuple
    framed: bool = False

    def __len__(self):
        return len(self.ids)


class BpeVocab:
    def __init__(self, alphabet, merges):
        self.alphabet = list(alphabet)
        self.merges = [tuple(m) for m in merges]
        self.id_to_token = list(SPECIALS)
        self.token_to_id = {t: i for i, t in enumerate(SPECIALS)}
        for sym in self.alphabet:
            self._add(sym)
        for a, b in self.merges:
            self._add(a + b)
        self.ranks = {m: i for i, m in enumerate(self.merges)}
        self._cache = {}

    def _add(self, tok):
        if tok not in self.token_to_id:
            self.token_to_id[tok] = len(self.id_to_token)
            self.id_to_token.append(tok)

    @property
    def specials(self):
        return dict(zip(("PAD", "BOS", "EOS", "UNK"), range(4)))

    def __len__(self):
        return len(self.id_to_token)

    def __eq__(self, other):
        return (isinstance(other, BpeVocab) and self.alphabet == other.alphabet
                and self.merges == other.merges)

    # -- encoding -----------------------------------------------------------

    def _segment(self, word):
        cached = self._cache.get(word)
        if cached is not None:
            return cached
        syms = list(word) + [EOW]
        ranks = self.ranks
        while len(syms) > 1:
            best = None
            for pair in zip(syms, syms[1:]):
                r = ranks.get(pair)
                if r is not None and (best is None or r < best):
                    best = r
            if best is None:
                break
            a, b = self.merges[best]
            out = []
            i = 0
            while i < len(syms):
                if i + 1 < len(syms) and syms[i] == a and syms[i + 1] == b:
                    out.append(a + b)
                    i += 2
                else:
                    out.append(syms[i])
                    i += 1
            syms = out
        tti = self.token_to_id
        ids = tuple(tti.get(s, UNK) for s in syms)
        self._cache[word] = ids
        return ids

    def encode(self, text, frame=False):
        ids = []
        for word in unicodedata.normalize("NFC", text).split():
            ids.extend(self._segment(word))
        if frame:
            ids = [BOS] + ids + [EOS]
        return TokenSeq(tuple(ids), frame)

    def decode(self, seq):
        ids = seq.ids if isinstance(seq, TokenSeq) else seq
        n = len(self.id_to_token)
        parts = []
        for i in ids:
            if not 0 <= i < n:
                raise VocabError(f"token id {i} out of range for vocab of size {n}")
            if i >= len(SPECIALS):
                parts.append(self.id_to_token[i])
        return "".join(parts).replace(EOW, " ").strip(" ")

    # -- serialization ------------------------------------------------------

    def save(self, path):
        header = {"format": FORMAT, "vocab_size": len(self), "specials": self.specials,
                  "alphabet": self.alphabet}
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(json.dumps(header, sort_keys=True) + "\n")
            for a, b in self.merges:
                fh.write(f"{a} {b}\n")

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8", newline="") as fh:
            lines = fh.read().split("\n")
        header = json.loads(lines[0])
        if header.get("format") != FORMAT:
            raise VocabError(f"{path}: not a gendistill BPE vocabulary")
        merges = [tuple(line.split(" ")) for line in lines[1:] if line]
        vocab = cls(header["alphabet"], merges)
        if len(vocab) != header["vocab_size"]:
            raise VocabError(f"{path}: header says {header['vocab_size']} tokens, rebuilt {len(vocab)}")
        return vocab


def _word_counts(texts):
    counts = Counter()
    for t in texts:
        counts.update(unicodedata.normalize("NFC", t).split())
    return counts


def learn_bpe(texts, target_vocab=4096):
    """Greedy BPE: repeatedly merge the most frequent adjacent symbol pair.

    Ties go to the lexicographically smallest pair. Stops once the vocabulary
    (specials + alphabet + merged tokens) reaches ``target_vocab`` or no pair
    occurs at least twice. ``texts`` may be a Dataset or any iterable of str.
    """
    if hasattr(texts, "texts"):
        texts = texts.texts
    counts = _word_counts(texts)
    if not counts:
        raise VocabError("cannot learn a vocabulary from an empty corpus")
    alphabet = sorted({ch for w in counts for ch in w} | {EOW})
    floor = len(alphabet) + len(SPECIALS)
    if target_vocab < floor:
        raise VocabError(f"target_vocab={target_vocab} is below alphabet+specials={floor}")

    # deterministic word order
    words = [list(w) + [EOW] for w in sorted(counts)]
    freqs = [counts[w] for w in sorted(counts)]
    pair_count = Counter()
    where = defaultdict(set)
    for wi, syms in enumerate(words):
        for pair in zip(syms, syms[1:]):
            pair_count[pair] += freqs[wi]
            where[pair].add(wi)
    heap = [(-c, p) for p, c in pair_count.items()]
    heapq.heapify(heap)

    vocab_tokens = set(SPECIALS) | set(alphabet)
    size = floor
    merges = []
    while size < target_vocab and heap:
        negc, pair = heapq.heappop(heap)
        if pair_count.get(pair, 0) != -negc:
            continue  # stale entry
        if -negc < 2:
            break
        a, b = pair
        new = a + b
        merges.append(pair)
        if new not in vocab_tokens:
            vocab_tokens.add(new)
            size += 1
        touched = set()
        for wi in sorted(where.pop(pair, ())):
            syms = words[wi]
            f = freqs[wi]
            for p in zip(syms, syms[1:]):
                pair_count[p] -= f
                touched.add(p)
                if pair_count[p] == 0:
                    del pair_count[p]
            out = []
            i = 0
            while i < len(syms):
                if i + 1 < len(syms) and syms[i] == a and syms[i + 1] == b:
                    out.append(new)
                    i += 2
                else:
                    out.append(syms[i])
                    i += 1
            words[wi] = out
            old_pairs = set()
            for p in zip(out, out[1:]):
                pair_count[p] += f
                touched.add(p)
                old_pairs.add(p)
            for p in old_pairs:
                where[p].add(wi)
        for p in touched:
            c = pair_count.get(p, 0)
            if c > 0:
                heapq.heappush(heap, (-c, p))
            elif p in where and p != pair:
                where.pop(p, None)
    return BpeVocab(alphabet, merges)
