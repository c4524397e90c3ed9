from .buchi import BuchiAutomaton, CapacityExceeded, Edge, LassoChecker, ltl_to_nba, nba_accepts_lasso
from .monitor import MonitorAutomaton, MonitorEvent, compile_monitor, minterms_to_formula
from .reach_avoid import ReachAvoidSequence, Stage, UnsupportedFragment, reach_avoid_decompose
from .hoa import export_hoa
