"""Request-quality scoring and revision engine for job-referral requests.

A reward model predicts whether a request will attract referral offers;
integrated-gradients attributions explain the prediction at sentence
level; a quality-trimmed retrieval index supplies exemplars; and LLM
revision workflows (basic and RAG) are measured by the change in
predicted success probability.
"""

__version__ = "0.1.0"
