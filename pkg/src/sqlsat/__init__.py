"""Equality-saturation optimizer for a small SQL subset.

The package is organized in layers: a relational IR with a reference
interpreter (`ir`, `interp`), a SQL front end and emitter (`parser`,
`emit`), statistics and a cost model (`catalog`, `costs`), the e-graph
engine and rewrite catalog (`egraph`, `rules`), plan extraction
(`extract`), a step-based rewriting environment with baseline agents
(`env`, `agents`), and a line-protocol bridge plus CLI (`bridge`,
`cli`).
"""

__version__ = "0.1.0"
