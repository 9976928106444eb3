"""Deterministic synthetic corpora for the end-to-end training criteria.

Eight types over three levels. Every sentence is five tokens: filler, cue,
entity, cue, filler, with the mention span on the entity. Cue words carry the
type signal.

Two worlds:

- ``clean_world``: 25 train mentions per class across all eight types. Train
  entities are in-vocabulary (unique token per mention), dev and test
  entities are deliberately OOV so those splits measure cue generalization.
- ``generic_world``: gold labels drawn only from the four classes that have
  descendants, 50 train mentions per class. Entity tokens are OOV in every
  split, so the cue distribution is the only class evidence and conflicting
  labels on identical contexts cannot be memorized away.

Two corruptions feed the noise-robustness criteria:

- ``overly_specific``: a share of mentions has its gold path replaced by the
  path of a random proper descendant, so the label set stays one chain but
  its terminal becomes deeper than the context supports. Meant for
  ``generic_world``, where every mention is eligible.
- ``extra_candidates``: a share of mentions gains a full path from another
  root, leaving two competing candidate terminals; these mentions are exactly
  the ones a single-path filter drops.
"""

import numpy as np

from nfetc.corpus import Corpus, MentionTriple
from nfetc.embeddings import WordEmbeddings
from nfetc.hierarchy import TypeForest
from nfetc.optim import make_rng

PATHS = ["/org", "/org/team", "/person", "/person/artist",
         "/person/artist/singer", "/person/athlete", "/place", "/place/city"]

CUES = {
    "/org": ["company", "firm"],
    "/org/team": ["club", "squad"],
    "/person": ["someone", "citizen"],
    "/person/artist": ["painter", "sculptor"],
    "/person/artist/singer": ["vocalist", "soprano"],
    "/person/athlete": ["sprinter", "keeper"],
    "/place": ["region", "area"],
    "/place/city": ["downtown", "metro"],
}

FILLERS = ["the", "a", "of", "in", "at", "was", "seen", "near", "with", "old"]

# root of the true type -> unrelated terminal injected as an extra candidate
CROSS_ROOT_JUNK = {
    "/org": "/place/city",
    "/person": "/org/team",
    "/place": "/person/athlete",
}

TRAIN_PER_CLASS = 25
DEV_PER_CLASS = 5
TEST_PER_CLASS = 10

# classes with at least one descendant; gold support of generic_world
GENERIC_CLASSES = ["/org", "/person", "/person/artist", "/place"]
GENERIC_TRAIN_PER_CLASS = 50

D_W = 8
WORLD_SEED = 20
NOISE_SEED = 77
DEV_NOISE_SEED = 78


def build_forest() -> TypeForest:
    return TypeForest(PATHS)


def _mention(forest, rng, path: str, entity: str) -> MentionTriple:
    cues = CUES[path]
    tokens = (str(rng.choice(FILLERS)), str(rng.choice(cues)), entity,
              str(rng.choice(cues)), str(rng.choice(FILLERS)))
    labels = tuple(sorted(forest.expand_to_path(path)))
    return MentionTriple(tokens, 2, 3, labels,
                         frozenset(forest.terminal_set(labels)))


def _corpus(forest, rng, paths, per_class: int, entity_prefix: str, tag: str) -> Corpus:
    triples = []
    i = 0
    for path in paths:
        for _ in range(per_class):
            triples.append(_mention(forest, rng, path, f"{entity_prefix}{i:03d}"))
            i += 1
    return Corpus(triples, tag=tag)


def build_embeddings(train_corpus: Corpus) -> WordEmbeddings:
    """Vectors for fillers, cues, and train entities only; dev and test
    entities stay out-of-vocabulary on purpose."""
    words = list(FILLERS)
    for cues in CUES.values():
        words.extend(cues)
    words.extend(sorted({t.tokens[2] for t in train_corpus}))
    rng = make_rng(WORLD_SEED + 1)
    return WordEmbeddings(words, rng.uniform(-0.5, 0.5, size=(len(words), D_W)))


def clean_world() -> dict:
    forest = build_forest()
    rng = make_rng(WORLD_SEED)
    train = _corpus(forest, rng, PATHS, TRAIN_PER_CLASS, "ent", "train")
    dev = _corpus(forest, rng, PATHS, DEV_PER_CLASS, "dev_ent", "dev")
    test = _corpus(forest, rng, PATHS, TEST_PER_CLASS, "test_ent", "test")
    return {"forest": forest, "train": train, "dev": dev, "test": test,
            "embeddings": build_embeddings(train)}


def generic_world() -> dict:
    """World whose gold types all have descendants, so any label can be made
    overly specific. No entity token has a vector."""
    forest = build_forest()
    rng = make_rng(WORLD_SEED + 2)
    train = _corpus(forest, rng, GENERIC_CLASSES, GENERIC_TRAIN_PER_CLASS,
                    "gent", "train")
    dev = _corpus(forest, rng, GENERIC_CLASSES, DEV_PER_CLASS, "gdev_ent", "dev")
    test = _corpus(forest, rng, GENERIC_CLASSES, TEST_PER_CLASS, "gtest_ent", "test")
    words = list(FILLERS)
    for cues in CUES.values():
        words.extend(cues)
    emb_rng = make_rng(WORLD_SEED + 3)
    embeddings = WordEmbeddings(words, emb_rng.uniform(-0.5, 0.5, size=(len(words), D_W)))
    return {"forest": forest, "train": train, "dev": dev, "test": test,
            "embeddings": embeddings}


def _replace_labels(triple: MentionTriple, labels, forest) -> MentionTriple:
    labels = tuple(sorted(labels))
    return MentionTriple(triple.tokens, triple.start, triple.end, labels,
                         frozenset(forest.terminal_set(labels)))


def _descendants(forest: TypeForest, path: str):
    return sorted(p for p in PATHS if p.startswith(path + "/"))


def overly_specific(corpus: Corpus, forest: TypeForest, rate: float = 0.4,
                    seed: int = NOISE_SEED) -> Corpus:
    """Replace the gold path of ``rate`` of all mentions with the path of a
    random proper descendant. The noisy label set is still a single chain.
    Mentions whose type has no descendant are skipped; there must be enough
    eligible ones to reach the quota."""
    n = round(rate * len(corpus))
    rng = make_rng(seed)
    picked = {}
    for i in rng.permutation(len(corpus)).tolist():
        if len(picked) == n:
            break
        deeper = _descendants(forest, next(iter(corpus[i].terminals)))
        if deeper:
            picked[i] = deeper[rng.integers(len(deeper))]
    if len(picked) < n:
        raise ValueError(f"only {len(picked)} of {n} mentions can be deepened")
    out = []
    for i, t in enumerate(corpus):
        if i in picked:
            out.append(_replace_labels(t, forest.expand_to_path(picked[i]), forest))
        else:
            out.append(t)
    return Corpus(out, tag=corpus.tag)


def extra_candidates(corpus: Corpus, forest: TypeForest, rate: float = 0.4,
                     seed: int = NOISE_SEED) -> Corpus:
    """Give ``rate`` of all mentions a second candidate terminal from another
    root, making their label sets multi-path."""
    n = round(rate * len(corpus))
    picked = set(make_rng(seed).permutation(len(corpus))[:n].tolist())
    out = []
    for i, t in enumerate(corpus):
        if i in picked:
            root = "/" + next(iter(t.terminals)).split("/")[1]
            junk = CROSS_ROOT_JUNK[root]
            labels = set(t.labels) | forest.expand_to_path(junk)
            out.append(_replace_labels(t, labels, forest))
        else:
            out.append(t)
    return Corpus(out, tag="train")
