"""Default semantic-label legend (Cityscapes ids) and occluder set.

The legend maps class names to the integer values used in semantic mask
files.  Both the legend and the occluder set are plain defaults; runs on
other datasets supply their own through the run configuration.
"""

from __future__ import annotations

CITYSCAPES_LABELS: dict[str, int] = {
    "unlabeled": 0,
    "ego vehicle": 1,
    "rectification border": 2,
    "out of roi": 3,
    "static": 4,
    "dynamic": 5,
    "ground": 6,
    "road": 7,
    "sidewalk": 8,
    "parking": 9,
    "rail track": 10,
    "building": 11,
    "wall": 12,
    "fence": 13,
    "guard rail": 14,
    "bridge": 15,
    "tunnel": 16,
    "pole": 17,
    "polegroup": 18,
    "traffic light": 19,
    "traffic sign": 20,
    "vegetation": 21,
    "terrain": 22,
    "sky": 23,
    "person": 24,
    "rider": 25,
    "car": 26,
    "truck": 27,
    "bus": 28,
    "caravan": 29,
    "trailer": 30,
    "train": 31,
    "motorcycle": 32,
    "bicycle": 33,
}

#: Twenty classes treated as potential occluders of a pedestrian.
DEFAULT_OCCLUDER_NAMES: tuple[str, ...] = (
    "wall", "building", "fence", "pole", "traffic light", "traffic sign",
    "vegetation", "car", "truck", "bus", "train", "motorcycle", "bicycle",
    "caravan", "trailer", "guard rail", "bridge", "tunnel", "rider",
    "dynamic",
)

DEFAULT_PEDESTRIAN_NAME = "person"
