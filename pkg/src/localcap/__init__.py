"""Local capacity of wireless ad hoc networks under several access schemes."""

__version__ = "0.1.0"

from .aloha import (AlohaParams, capacity_aloha, coverage_probability, laplace_w,
                    sample_w, sigma_aloha, w_cdf)
from .capacity import (CapacityEstimate, ENEstimate, SampleCache, estimate_capacity,
                       estimate_en_direct, homothety_check)
from .exceptions import *  # noqa: F401,F403
from .geometry import (COINCIDENCE_RADIUS, SIR_INFINITE, ChannelParams, Point2D, Region,
                       TransmitterSet, interference_field, sir_at, sir_gradient, sir_many)
from .point_processes import (GridKind, Lattice, ProcessSpec, gen_coloring, gen_csma,
                              gen_grid, gen_poisson, packing_density)
from .reception import (ReceptionContour, TraceConfig, boundary_start, covers,
                        first_guess_radius, newton_start, trace_contour)
