"""Reliability- and age-aware status updating over finite-blocklength
wireless links, with extreme-value analysis of the peak age of
information."""

from .phy import (
    ChannelDraw,
    LinkParams,
    erfc_inv,
    fb_rate,
    path_loss_db,
    sample_channel_gain,
    sample_decode,
)
from .aoi import AoiState, PeakRecord, advance_age, block_maxima, instantaneous_age
from .evt import (
    ExceedanceMoments,
    GevParams,
    TailDataError,
    empirical_ccdf,
    fit_gev_block_maxima,
    fit_gpd_pot,
    gev_ccdf,
    gev_cdf,
    ks_distance,
    runs_extremal_index,
    shape_from_moments,
)
from .queues import TailMode, VirtualQueueSet, phi_weight, psi_weight, update_cost_queue, update_tail_queues
from .optimizer import (
    AuxPoint,
    CachedSp1Solver,
    Sp1Instance,
    Sp1Solution,
    feasible_power_for_length,
    initial_feasible_point,
    solve_cpj,
    solve_sp1_ccp,
    solve_sp1_oracle,
    solve_sp2,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
