"""Word and character error rates via dynamic-programming edit distance."""

from __future__ import annotations


def edit_distance(ref, hyp) -> int:
    """Levenshtein distance with unit costs over arbitrary token sequences."""
    ref, hyp = list(ref), list(hyp)
    previous = list(range(len(hyp) + 1))
    for i in range(1, len(ref) + 1):
        current = [i] + [0] * len(hyp)
        for j in range(1, len(hyp) + 1):
            substitution = previous[j - 1] + (0 if ref[i - 1] == hyp[j - 1] else 1)
            current[j] = min(previous[j] + 1, current[j - 1] + 1, substitution)
        previous = current
    return previous[len(hyp)]


def _rate(ref_tokens, hyp_tokens) -> float:
    if not ref_tokens:
        return 0.0 if not hyp_tokens else 1.0
    return edit_distance(ref_tokens, hyp_tokens) / len(ref_tokens)


def wer(ref, hyp) -> float:
    """Word error rate; accepts token lists or whitespace-split strings."""
    ref_tokens = ref.split() if isinstance(ref, str) else list(ref)
    hyp_tokens = hyp.split() if isinstance(hyp, str) else list(hyp)
    return _rate(ref_tokens, hyp_tokens)


def cer(ref: str, hyp: str) -> float:
    """Character error rate over the raw strings, spaces included."""
    return _rate(list(ref), list(hyp))
