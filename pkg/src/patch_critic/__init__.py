"""Execution-free evaluation of repository-level code patches.

Reference-aware LLM critics predict per-test oracles for candidate
patches, aggregate them into build-status predictions under the all-pass
rule, and rank competing agentic workflows by predicted test pass rate —
without compiling or running any code.
"""

__version__ = "0.1.0"
