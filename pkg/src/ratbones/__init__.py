"""Real quadratic rational maps: real entropy, bones and PCF transversality."""

from ratbones.family import (
    CirclePoint,
    CriticalValuePair,
    MobiusFrame,
    NormalFormParams,
    QuadraticMap,
    RationalMap,
    RegionClass,
    SigmaPoint,
    classify_region,
    critical_values,
    map_from_critical_values,
    normal_form_to_map,
    sigma_coords,
)
from ratbones.entropy import EntropyEstimate, IntervalModel, real_entropy

__all__ = [
    "CirclePoint",
    "CriticalValuePair",
    "EntropyEstimate",
    "IntervalModel",
    "MobiusFrame",
    "NormalFormParams",
    "QuadraticMap",
    "RationalMap",
    "RegionClass",
    "SigmaPoint",
    "classify_region",
    "critical_values",
    "map_from_critical_values",
    "normal_form_to_map",
    "real_entropy",
    "sigma_coords",
]
