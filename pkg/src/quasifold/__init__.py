"""Quasifold groupoids over countable affine actions, computed exactly."""

from .affine import AffineGroup, AffineMap, GroupElement, enumerate_group, orbit_equal
from .bibundle import (
    BundleClass,
    Lift,
    LiftFamily,
    classify,
    compose_bibundles,
    from_functor,
    identity_bibundle,
    isomorphic,
    orbit_map,
    restrict,
)
from .groupoid import ActionGroupoid, GermGroupoid, Pseudogroup, germ_groupoid_of_atlas, is_effective
from .lift import SampledMap, lift_local_diffeo, recover_affine
from .model import Atlas, ModelQuasifold, OpenBoxSet, Transition, atlas_Pi, quotient_point
from .nonexample import FlatFlow, jet_flatness_check, orbit_coincidence, recovery_failure_demo
from .scalar import Approx, Quadratic, Rational, parse, scalar, sqrt
from .torus import QuadraticIrrational, WitnessMatrix, continued_fraction, morita_equivalent
from .verdict import Decision, Verdict

__version__ = "0.1.0"
