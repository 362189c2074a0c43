"""Sentence-level spoiler detection for book reviews.

Pipeline: parse newline-delimited review dumps, flatten them into labeled
(title, sentence) examples, encode them against a frequency-ranked
vocabulary, and train either a from-scratch embedding+LSTM classifier or a
DF-IIF handcrafted-feature logistic baseline.  Evaluation is rank-based ROC
AUC, which stays meaningful under the heavy class skew typical of spoiler
data.
"""

__version__ = "0.1.0"
