"""Social-aware D2D traffic offloading simulator."""

from .closeness import Degenerate, GammaParams, fit_gamma, reg_lower_gamma
from .engine import CostConfig, EpisodeConfig, EpisodeMetrics, UserMetrics, run_episode
from .offsn import ClosenessGraph, OffsnPartition, best_holder, build_graph, frequent_users, partition
from .onsn import IbpState, Selection, ibp_select, update_prior
from .phy import ChannelConfig, rate_cellular, rate_clean, rate_d2d
from .sweep import SweepSpec, emit_csv, emit_plot, parse_csv, run_sweep
from .trace import ContactStats, EncounterRecord, contact_stats, parse_trace

__version__ = "0.1.0"
