"""Certified measures of boxes in l2 and of their images under infinite rotations."""
import sys as _sys

from .errors import CapReached, InputError, PreconditionError, UnsupportedInput
from .seqcert import (CertifiedValue, Status, TailDescriptor, log_product_with_certificate,
                      sum_with_certificate)
from .rectangle import (EmptyRectangle, MeasurableRectangle, intersect_same_basis, measure,
                        shift, unit_cube)
from .operator import (BlockRotation, Composition, EmbeddedFinite, HouseholderFromVector,
                       Identity, PermutationSign, compose, geometric_unit_vector,
                       harmonic_unit_vector, transpose)
from .proximity import Classification, ProximityReport, classify, normalize_diagonal
from .determinant import det_sequence, find_N_epsilon, gram_det, principal_det
from .geometry import (gamma, inner_bound, outer_bound, polygon_intersection_area, sandwich)
from .registry import Registry, RingElement, decompose, glued_measure
from .group import (RotationFlow, continuity_diagnosis, lambda_t, overlap, overlap_curve,
                    shift_overlap)

__all__ = [name for name, obj in list(globals().items())
           if not name.startswith("_") and not isinstance(obj, type(_sys))]
