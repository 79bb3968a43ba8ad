"""WordPiece vocabulary training and encoding over Java lexeme streams.

Keywords, separators, operators, ``true``/``false``/``null`` and the model
control tokens are kept whole; only identifiers and other literals are
segmented into subword pieces.
"""

from __future__ import annotations

import heapq
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .lexer import JavaToken, SpecialTokenInventory, is_protected, special_inventory

CONTINUATION = "##"
MAX_LEXEME_CHARS = 100

PAD, UNK, CLS, SEP, MASK = "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"


class TargetTooSmall(ValueError):
    pass


class IdOutOfRange(IndexError):
    pass


class InvalidVocabulary(ValueError):
    pass


class Vocabulary:
    """Ordered token inventory; the position of a token is its id."""

    def __init__(self, tokens: Sequence[str], inventory: SpecialTokenInventory | None = None):
        self.tokens = tuple(tokens)
        self.index = {tok: i for i, tok in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            dupes = [t for t, n in Counter(self.tokens).items() if n > 1]
            raise InvalidVocabulary(f"duplicate tokens: {dupes[:5]}")
        for tok in (PAD, UNK, CLS, SEP, MASK):
            if tok not in self.index:
                raise InvalidVocabulary(f"missing control token {tok}")
        if self.index[PAD] != 0:
            raise InvalidVocabulary("[PAD] must have id 0")
        self.inventory = inventory or special_inventory()
        self.special_ids = frozenset(
            self.index[t] for t in self.inventory.all_tokens() if t in self.index
        )
        self.control_ids = frozenset(self.index[t] for t in self.inventory.control if t in self.index)
        self.continuation_prefix = CONTINUATION

    @property
    def size(self) -> int:
        return len(self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def id_of(self, token: str) -> int:
        return self.index[token]

    @property
    def pad_id(self) -> int:
        return self.index[PAD]

    @property
    def unk_id(self) -> int:
        return self.index[UNK]

    @property
    def cls_id(self) -> int:
        return self.index[CLS]

    @property
    def sep_id(self) -> int:
        return self.index[SEP]

    @property
    def mask_id(self) -> int:
        return self.index[MASK]

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for tok in self.tokens:
                fh.write(tok + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        """Read a one-token-per-line vocab file, including external BERT vocabularies."""
        text = Path(path).read_text(encoding="utf-8")
        lines = text.split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        return cls([line.rstrip("\r") for line in lines])


@dataclass
class EncodedSequence:
    ids: list[int] = field(default_factory=list)
    lexeme_boundaries: list[tuple[int, int]] = field(default_factory=list)


def _word_pieces(word: str) -> list[str]:
    return [word[0]] + [CONTINUATION + c for c in word[1:]]


def _merged(left: str, right: str) -> str:
    return left + right[len(CONTINUATION):]


def _trainable(tok: JavaToken) -> bool:
    return not is_protected(tok) and len(tok.text) <= MAX_LEXEME_CHARS


def train_vocab(
    corpus: Iterable[Iterable[JavaToken]],
    target_size: int,
    inventory: SpecialTokenInventory | None = None,
) -> Vocabulary:
    """Train a WordPiece vocabulary of at most ``target_size`` tokens.

    Pairs are merged greedily by ``count(pair) / (count(left) * count(right))``;
    equal scores go to the lexicographically smallest merged string.
    """
    inventory = inventory or special_inventory()
    word_counts: Counter[str] = Counter()
    for stream in corpus:
        for tok in stream:
            if _trainable(tok):
                word_counts[tok.text] += 1

    tokens: list[str] = list(inventory.control)
    tokens += [t for t in inventory.java_fixed + inventory.pseudo_keywords if t not in tokens]
    known = set(tokens)

    alphabet: set[str] = set()
    for word in word_counts:
        alphabet.update(_word_pieces(word))
    new_alphabet = sorted(alphabet - known)
    if target_size <= len(tokens) + len(new_alphabet):
        raise TargetTooSmall(
            f"target size {target_size} must exceed {len(tokens)} special tokens "
            f"plus {len(new_alphabet)} alphabet symbols"
        )
    tokens += new_alphabet
    known.update(new_alphabet)

    words = [_word_pieces(w) for w in sorted(word_counts)]
    counts = [word_counts[w] for w in sorted(word_counts)]

    sym_freq: Counter[str] = Counter()
    pair_freq: Counter[tuple[str, str]] = Counter()
    pair_words: dict[tuple[str, str], set[int]] = defaultdict(set)
    sym_pairs: dict[str, set[tuple[str, str]]] = defaultdict(set)
    for wi, (pieces, n) in enumerate(zip(words, counts)):
        for p in pieces:
            sym_freq[p] += n
        for pair in zip(pieces, pieces[1:]):
            pair_freq[pair] += n
            pair_words[pair].add(wi)
            sym_pairs[pair[0]].add(pair)
            sym_pairs[pair[1]].add(pair)

    heap: list[tuple[float, str, str, str]] = []
    merged_of: dict[tuple[str, str], str] = {}

    def push(pair: tuple[str, str]) -> None:
        m = merged_of.get(pair)
        if m is None:
            m = merged_of[pair] = _merged(*pair)
        heapq.heappush(heap, (-pair_freq[pair] / (sym_freq[pair[0]] * sym_freq[pair[1]]), m, pair[0], pair[1]))

    for pair in pair_freq:
        push(pair)

    # Scores only need an eager push when they rise; entries whose stored
    # score is too high are refreshed when popped.
    while len(tokens) < target_size and heap:
        neg, merged, left, right = heapq.heappop(heap)
        pair = (left, right)
        c = pair_freq[pair]
        if c <= 0:
            continue
        current = -c / (sym_freq[left] * sym_freq[right])
        if current != neg:
            if current > neg:
                push(pair)
            continue

        raised: set[tuple[str, str]] = set()
        for wi in sorted(pair_words.pop(pair)):
            pieces = words[wi]
            n = counts[wi]
            for old in zip(pieces, pieces[1:]):
                pair_freq[old] -= n
            out: list[str] = []
            i = 0
            while i < len(pieces):
                if i + 1 < len(pieces) and pieces[i] == left and pieces[i + 1] == right:
                    out.append(merged)
                    sym_freq[left] -= n
                    sym_freq[right] -= n
                    sym_freq[merged] += n
                    i += 2
                else:
                    out.append(pieces[i])
                    i += 1
            words[wi] = out
            new_pairs = set(zip(out, out[1:]))
            for new in zip(out, out[1:]):
                pair_freq[new] += n
            for new in new_pairs:
                pair_words[new].add(wi)
                sym_pairs[new[0]].add(new)
                sym_pairs[new[1]].add(new)
                raised.add(new)
            for stale in set(zip(pieces, pieces[1:])) - new_pairs:
                if stale in pair_words:
                    pair_words[stale].discard(wi)

        for sym in (left, right):
            live = {p for p in sym_pairs[sym] if pair_freq[p] > 0}
            sym_pairs[sym] = live
            raised |= live
        heappush = heapq.heappush
        for p in raised:
            c = pair_freq[p]
            if c > 0:
                m = merged_of.get(p) or merged_of.setdefault(p, _merged(*p))
                heappush(heap, (-c / (sym_freq[p[0]] * sym_freq[p[1]]), m, p[0], p[1]))

        if merged not in known:
            tokens.append(merged)
            known.add(merged)

    return Vocabulary(tokens, inventory)


def segment(word: str, vocab: Vocabulary) -> list[int] | None:
    """Greedy longest-match-first split of ``word``; None when unmatchable."""
    if len(word) > MAX_LEXEME_CHARS:
        return None
    ids = []
    start = 0
    while start < len(word):
        end = len(word)
        found = None
        while end > start:
            piece = word[start:end]
            if start > 0:
                piece = CONTINUATION + piece
            found = vocab.index.get(piece)
            if found is not None:
                break
            end -= 1
        if found is None:
            return None
        ids.append(found)
        start = end
    return ids


def encode(tokens: Sequence[JavaToken], vocab: Vocabulary) -> EncodedSequence:
    seq = EncodedSequence()
    for tok in tokens:
        start = len(seq.ids)
        whole = vocab.index.get(tok.text) if is_protected(tok) else None
        if whole is not None:
            seq.ids.append(whole)
        else:
            pieces = segment(tok.text, vocab)
            seq.ids.extend(pieces if pieces is not None else [vocab.unk_id])
        seq.lexeme_boundaries.append((start, len(seq.ids)))
    return seq


def decode(ids: Sequence[int], vocab: Vocabulary) -> list[str]:
    lexemes: list[str] = []
    for i in ids:
        if not 0 <= i < vocab.size:
            raise IdOutOfRange(f"id {i} outside vocabulary of size {vocab.size}")
        piece = vocab.tokens[i]
        if piece.startswith(CONTINUATION) and lexemes and i not in vocab.special_ids:
            lexemes[-1] += piece[len(CONTINUATION):]
        else:
            lexemes.append(piece)
    return lexemes
