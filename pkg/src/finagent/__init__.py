"""Financial tool-using agent engine.

A query is answered by a bounded action loop: generate a profile and an
overall plan, then repeatedly pick an action (tool search, tool details,
code execution, web search, or finish), observe the result, and let a
summary/reflexion pass condense the observation into short-term memory and
optionally amend the plan. Runs are recorded as replayable trajectories;
the evaluation harness computes robustness, helpfulness and call-frequency
metrics from them and exports per-subtask fine-tuning datasets.
"""

__version__ = "0.1.0"
