"""Per-step domain builders and benchmark geometry presets."""
from .annulus import (
    AnnulusBuild,
    AnnulusSpec,
    build_annulus,
    check_containment,
    initial_annulus,
    rotating_square_preset,
    ruled_surface,
)
from .slip import SlipState, reparameterize_closed, slip_shift
from .open_domain import FlapCase, OpenDomainSpec, build_open_domain, coons_net, flap_preset
