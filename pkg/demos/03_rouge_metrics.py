"""ROUGE-1/2/L/SU4 scoring walk-through.

All metrics operate on flat token lists and return precision / recall / F1;
the truncated-recall variant reproduces the word-limited recall protocol
used for small human-written evaluation sets.
"""

from querysumm.rouge import rouge_l, rouge_n, rouge_recall_truncated, rouge_su4
from querysumm.text import tokenize

reference = tokenize("The storm closed the coast road on Monday.")
candidate = tokenize("A storm closed the coast road early Monday morning.")
print("reference:", reference)
print("candidate:", candidate)

for name, scorefn in [
    ("rouge-1", lambda: rouge_n(candidate, reference, 1)),
    ("rouge-2", lambda: rouge_n(candidate, reference, 2)),
    ("rouge-l", lambda: rouge_l(candidate, reference)),
    ("rouge-su4", lambda: rouge_su4(candidate, reference)),
]:
    s = scorefn()
    print(f"{name:>9}: p={s.precision:.4f} r={s.recall:.4f} f1={s.f1:.4f}")

# ROUGE-L counts in-order (not necessarily contiguous) overlap: swapping
# two words lowers it while leaving ROUGE-1 untouched.
a, b = tokenize("one two three four"), tokenize("one three two four")
print(f"\nswapped middle words: R-1 f1 = {rouge_n(a, b, 1).f1:.3f}, "
      f"R-L f1 = {rouge_l(a, b).f1:.3f}")

# SU4 pools unigrams with skip-bigrams of positional gap <= 4, so it sits
# between the strictness of R-2 and the looseness of R-1.
print(f"same pair under SU4: f1 = {rouge_su4(a, b).f1:.3f}")

# Recall with a word limit: the candidate is cut to the first N tokens, the
# reference never is.
long_candidate = candidate * 40
out = rouge_recall_truncated(long_candidate, reference, word_limit=250)
print("\nrecall with a 250-word limit on a repetitive long candidate:")
for metric, value in out.items():
    print(f"  {metric}: {value:.4f}")
