"""MIMO-OSDM simulation with low-complexity MMSE equalizers.

Time-invariant links use a per-vector equalizer whose cost is linear in
the vector length; time-varying links use a CE-BEM block equalizer built
on a banded block LDL^H solve whose cost is linear in the block length.
Dense cubic-cost solvers are kept alongside as references.
"""

from .channel import (
    BemCirSet,
    CirSet,
    TvCirTrace,
    apply_channel_ti,
    apply_channel_tv,
    composite_channel_dense,
    fit_bem,
    gen_ti_channel,
    gen_tv_channel,
    load_channel,
    save_channel,
)
from .equalizer_ti import build_pervector_channel, equalize_ti_direct, equalize_ti_fast
from .equalizer_tv import (
    BandedTvSystem,
    banded_normal_matrix,
    build_tv_banded_channel,
    equalize_tv_direct,
    equalize_tv_fast,
    truncated_channel_dense,
)
from .estimators import TiMmseEqualizer, TvMmseEqualizer
from .exceptions import ConfigurationError, DimensionError, FactorizationError, SingularityError
from .flops import FlopCounter
from .modem import MimoOsdmConfig, osdm_demodulate, osdm_modulate
from .sim import SimCampaign, run_ber_point, run_campaign, run_complexity_bench

__version__ = "0.1.0"
