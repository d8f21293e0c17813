"""Pipeline and evaluation toolkit for sports-feedback commentary data.

Stages: caption ingest -> LLM refinement -> precise localization -> clip
windowing -> unified training manifest. Evaluation: lexical metrics (BLEU-4,
METEOR, ROUGE-L, BERTScore), rubric-based LLM judging (specificity,
actionability), human-agreement statistics, and bias probes.
"""

PIPELINE_VERSION = "0.1.0"
