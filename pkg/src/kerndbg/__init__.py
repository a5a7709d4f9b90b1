"""kerndbg: a toolchain for the kern mini actor language.

Runs kern programs under a tracing runtime, analyses the resulting traces
for message races and common failure symptoms (blocked processes, lost and
orphan messages), and drives a log-based causal-consistent reversible
debugger over them.
"""

__version__ = "0.1.0"
