"""Token-in-context feature extraction for every labeling scheme.

Schemes: sparse-code indicators (sc), raw embedding coordinates (dense),
Brown-cluster path prefixes (brown), feature-rich word templates with and
without character templates (fr_w, fr_wc), word identity (wi), and the
union wi_sc. Extraction is a pure function of the sentence, position and
immutable resources; vectors come back sorted by feature string.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

SCHEMES = ("sc", "dense", "brown", "fr_w", "fr_wc", "wi", "wi_sc")

_NUMBER_RE = re.compile(r"^[+-]?\d+([.,]\d+)*$")


class FeatureError(ValueError):
    """Missing resource or invalid feature request."""


@dataclass
class FeatureConfig:
    scheme: str
    window: int = 1
    brown_prefix_lengths: tuple = (4, 6, 10, 20)

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise FeatureError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.window not in (1, 2):
            raise FeatureError("window must be 1 or 2")


@dataclass
class FeatureResources:
    """Immutable lookups the schemes draw on; only the needed ones are set."""

    codes: object = None          # SparseCodes
    table: object = None          # EmbeddingTable
    clusters: dict = field(default=None)  # word -> bit-string path
    lowercase_fallback: bool = False


def _safe(text: str) -> str:
    """Feature strings must not contain whitespace."""
    return "".join("_" if ch.isspace() else ch for ch in text)


def _offset_tag(o: int) -> str:
    return "[0]" if o == 0 else f"[{o:+d}]"


def sparse_features(alpha) -> set:
    """Sign-and-index indicators of a sparse code's nonzero coefficients.

    ``alpha`` is an (indices, values) pair; each nonzero j yields
    '+j' or '-j' depending on the coefficient's sign.
    """
    idx, val = alpha
    return {("+" if v > 0 else "-") + str(int(i)) for i, v in zip(idx, val)}


def dense_features(vector) -> list:
    """One real-valued feature per embedding coordinate, zeros included."""
    return [(f"d:{j}", float(v)) for j, v in enumerate(vector)]


def brown_features(path: str, lengths=(4, 6, 10, 20)) -> set:
    """Length-p prefixes of a Brown cluster bit-string path.

    Paths shorter than p contribute the whole path for that p.
    """
    return {f"bp{p}={path[:min(p, len(path))]}" for p in sorted(lengths)}


def load_clusters(path) -> dict:
    """Read `bitstring<TAB>word<TAB>count` Brown clustering output."""
    clusters = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            cols = line.split("\t")
            if len(cols) < 2:
                raise FeatureError(f"{path}:{lineno}: expected 'path<TAB>word[<TAB>count]'")
            bits, word = cols[0], cols[1]
            if bits.strip("01"):
                raise FeatureError(f"{path}:{lineno}: path {bits!r} is not a bit string")
            clusters[word] = bits
    return clusters


def rich_features(sentence, t, include_chars=False) -> set:
    """Word-template features of the feature-rich baseline at position t.

    Word level: unigrams at offsets -2..2, target/other pairs out to
    offset 9 on each side, and contiguous 2- to 5-grams anchored around
    the target. Character level (when enabled): number / title-case /
    no-alphanumeric indicators plus prefixes and suffixes of length 1-4
    of the target form. Templates touching positions outside the
    sentence are skipped.
    """
    n = len(sentence)
    if not 0 <= t < n:
        raise FeatureError(f"position {t} out of range for sentence of length {n}")
    feats = set()

    def form(i):
        return _safe(sentence[i])

    for j in range(-2, 3):
        if 0 <= t + j < n:
            feats.add(f"w[{j}]={form(t + j)}")
    for i in range(1, 10):
        if t + i < n:
            feats.add(f"w[0,{i}]={form(t)}|{form(t + i)}")
        if t - i >= 0:
            feats.add(f"w[{-i},0]={form(t - i)}|{form(t)}")
    ngram_anchors = (
        [(j, j + 1) for j in range(-2, 2)]
        + [(j, j + 2) for j in range(-2, 1)]
        + [(j - 1, j + 2) for j in range(-1, 1)]
        + [(-2, 2)]
    )
    for a, b in ngram_anchors:
        if t + a >= 0 and t + b < n:
            grams = "|".join(form(t + i) for i in range(a, b + 1))
            feats.add(f"w[{a}..{b}]={grams}")

    if include_chars:
        w = sentence[t]
        if _NUMBER_RE.match(w):
            feats.add("num=1")
        if w.istitle():
            feats.add("title=1")
        if not any(ch.isalnum() for ch in w):
            feats.add("nonalnum=1")
        sw = _safe(w)
        for i in range(1, 5):
            feats.add(f"pre{i}={sw[:i]}")
            feats.add(f"suf{i}={sw[-i:]}")
    return feats


def _windowed(sentence, t, window, per_word):
    """Apply a per-word extractor at every in-bounds offset with [o] prefixes."""
    feats = []
    n = len(sentence)
    for o in range(-window, window + 1):
        pos = t + o
        if not 0 <= pos < n:
            continue
        tag = _offset_tag(o)
        feats.extend((tag + name, value) for name, value in per_word(sentence[pos]))
    return feats


def token_features(sentence, t, config: FeatureConfig, resources: FeatureResources):
    """Feature vector for the token at position t under the configured scheme.

    Returns a list of (feature string, value) pairs, unique and sorted.
    Indicator features carry value 1.0; out-of-vocabulary words simply
    contribute nothing at their offset.
    """
    n = len(sentence)
    if not 0 <= t < n:
        raise FeatureError(f"position {t} out of range for sentence of length {n}")
    scheme = config.scheme
    low = resources.lowercase_fallback

    if scheme in ("fr_w", "fr_wc"):
        out = [(f, 1.0) for f in rich_features(sentence, t, include_chars=scheme == "fr_wc")]
        out.sort()
        return out

    def sc_word(word):
        entry = resources.codes.get(word, lowercase_fallback=low)
        if entry is None:
            return []
        return [(f, 1.0) for f in sparse_features(entry)]

    def dense_word(word):
        if not resources.table.has_vector(word, lowercase_fallback=low):
            return []
        return dense_features(resources.table.lookup(word, lowercase_fallback=low))

    def brown_word(word):
        path = resources.clusters.get(word)
        if path is None:
            return []
        return [(f, 1.0) for f in brown_features(path, config.brown_prefix_lengths)]

    def wi_word(word):
        return [(f"w={_safe(word)}", 1.0)]

    if scheme == "sc":
        _require(resources.codes, "sc", "sparse codes")
        feats = _windowed(sentence, t, config.window, sc_word)
    elif scheme == "dense":
        _require(resources.table, "dense", "embedding table")
        feats = _windowed(sentence, t, config.window, dense_word)
    elif scheme == "brown":
        _require(resources.clusters, "brown", "cluster table")
        feats = _windowed(sentence, t, config.window, brown_word)
    elif scheme == "wi":
        feats = _windowed(sentence, t, config.window, wi_word)
    else:  # wi_sc
        _require(resources.codes, "wi_sc", "sparse codes")
        feats = _windowed(sentence, t, config.window, wi_word)
        feats += _windowed(sentence, t, config.window, sc_word)

    out = sorted(dict(feats).items())
    return out


def _require(resource, scheme, what):
    if resource is None:
        raise FeatureError(f"scheme {scheme!r} needs a {what}")


def sentence_features(sentence, config: FeatureConfig, resources: FeatureResources):
    """Feature vectors for every position of a sentence of word forms."""
    return [token_features(sentence, t, config, resources) for t in range(len(sentence))]
