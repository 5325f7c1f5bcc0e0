from .montecarlo import exclusion_ensemble, stream_keys, zrp_ensemble
from .quadrature import fsum_complex, kernel, pair_table

__all__ = ["exclusion_ensemble", "fsum_complex", "kernel", "pair_table", "stream_keys", "zrp_ensemble"]
