"""vizcot: natural-language analysis queries to visualizations through an
explicit five-stage reasoning trace, with corpus construction, execution-based
evaluation, and interactive refinement."""

__version__ = "0.1.0"
