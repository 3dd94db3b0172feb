"""Cooperative team games, a firefighting gridworld, and independent deep
Q-learners built to survive its coordination pathologies.

The package splits into small layers:

- :mod:`firemen.games` - strategic-form team games and their analysis
- :mod:`firemen.gridworld` - the two-agent firefighting environment
- :mod:`firemen.oracle` - trajectory -> equipment label classification
- :mod:`firemen.replay` - FIFO and per-action episodic replay memories
- :mod:`firemen.network` - a from-scratch conv Q-network with Adam
- :mod:`firemen.learners` - tabular and deep independent learners
- :mod:`firemen.matrix_runner` - repeated strategic-form game driver
- :mod:`firemen.metrics` - rolling distributions and reward summaries
- :mod:`firemen.svgplot` - SVG emitters (ternary phase plots and friends)
- :mod:`firemen.experiment` - seeded multi-run experiment driver
- :mod:`firemen.cli` - the ``firemen`` command line
"""

__version__ = "0.1.0"
