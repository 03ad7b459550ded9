"""
Help text strings for the :mod:`gpshield.cli` module.
"""
CLI_DESCRIPTION: str = (
    "This program learns switched dynamics with Gaussian processes, abstracts "
    "them into an interval MDP and synthesizes a maximally permissive safety "
    "shield."
)

GEN_DATA: str = "Sample training transitions of a benchmark system"
FIT: str = "Fit one Gaussian process regressor per mode"
ABSTRACT: str = "Build the interval MDP abstraction of a fitted regressor"
SYNTHESIZE: str = "Synthesize the shield of a safe LTL formula"
SIMULATE: str = "Simulate shielded (or unshielded) trajectories"
VALIDATE: str = "Check the interval MDP bounds against sampled transitions"

CONFIG: str = (
    "JSON configuration file or shipped configuration name "
    "(planar4_empty, planar4_obstacles, planar4_complex; default: built-in "
    "defaults)"
)
SEED: str = "Random seed (default: from the configuration)"
DELTA: str = (
    "Confidence of the regression error bounds in (0, 1) "
    "(default: from the configuration, which must set it)"
)
VERBOSE: str = "Log pipeline progress (default: off)"
QUIET: str = "Log errors only (default: off)"

SYSTEM: str = "Registered system name (default: from the configuration)"
PER_MODE: str = "Transitions per mode (default: from the configuration)"
DATA: str = "Dataset file written by gen-data"
GP: str = "Regressor file written by fit"
IMDP: str = "Interval MDP file written by abstract"
SPEC: str = "Safe LTL formula, e.g. 'G(!b)' (default: from the configuration)"
P: str = "Violation probability threshold in (0, 1] (default: from the configuration)"
TOL: str = "Value iteration tolerance (default: from the configuration)"
SHIELD: str = "Shield file written by synthesize"
TRAJECTORIES: str = "Number of trajectories (default: from the configuration)"
STEPS: str = "Steps per trajectory (default: from the configuration)"
UNSHIELDED: str = "Bypass the shield (default: off)"
EXPECT_SAFE: str = "Exit with status 1 when a violation is observed (default: off)"
HISTOGRAM: str = "Write the survival time histogram as CSV"
GNUPLOT: str = "Write per-step interventions as gnuplot columns"
SAMPLES: str = "Samples per (state, mode) pair (default: from the configuration)"
MAX_PAIRS: str = "Test a random subset of this many (state, mode) pairs (default: all)"
MIN_FRACTION: str = (
    "Fraction of transitions required within their 3-sigma windows "
    "(default: from the configuration)"
)
OUTPUT: str = "Output file"
HELP: str = "Display this help message and exit"
MORE_HELP: str = (
    "Display the extensive help message, or one of its sections (summary, usage, "
    "formulas, exit status), and exit"
)

HELPTEXT: str = """
gpshield

=======
SUMMARY
=======

Synthesizes maximally permissive shields for switched stochastic systems
whose dynamics are only known through data.

The dynamics of every mode are learned with a Gaussian process regressor.
Its posterior mean and a high-probability error bound give, for every cell
of a uniform grid over the domain, interval bounds on the probability of
reaching each other cell. The resulting interval MDP is combined with the
automaton of a safe LTL formula, and a value iteration removes every mode
whose worst-case violation probability reaches the threshold p. Modes that
remain allowed can be chosen freely by any agent.

=====
USAGE
=====

  gpshield gen-data   --config planar4_obstacles --out data.csv
  gpshield fit        --config planar4_obstacles --data data.csv --out gp.npz
  gpshield abstract   --config planar4_obstacles --gp gp.npz --out model.imdp
  gpshield synthesize --imdp model.imdp --spec "G(!b)" --p 0.05 --out s.shield
  gpshield simulate   --config planar4_obstacles --shield s.shield --out report.txt
  gpshield validate   --config planar4_obstacles --imdp model.imdp --out checks.csv

Every subcommand accepts --config; gen-data, fit, simulate and validate
also accept --seed (abstract and synthesize are deterministic). Explicit
flags override the configuration. The abstraction confidence delta has no
default: set it in the configuration or pass --delta to abstract.

==========
FORMULAS
==========

Safe formulas are built from atomic propositions (cell labels), true,
false, !, &, |, X, G, G<=k, F<=k, U<=k and 'a -> f' with an atomic left
side. Negation applies to atomic propositions only. Unbounded F and U are
rejected.

===========
EXIT STATUS
===========

  0  success
  1  validation failure, violations with --expect-safe, or a failed
     computation (e.g. an interval MDP with infeasible rows)
  2  usage error, missing file or invalid input
"""
