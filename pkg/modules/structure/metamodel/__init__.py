"""
Metamodel module: the structural tuple theta, environment families with their
probability metric D_E, admissible transformations and the canonical encoding
that defines the description length |theta|.
"""

from .environments import (
    ACTION_KINDS,
    ANY_KEY,
    METRIC_KINDS,
    Environment,
    EnvironmentFamily,
    TransformSpec,
    check_transform_magnitude,
    condition_key,
    env_distance,
    identity_transform,
)
from .model import (
    CLASS_KINDS,
    HypothesisClassSpec,
    MetaModel,
    PriorSpec,
    decode_value,
    description_length_bits,
    deserialize_metamodel,
    encode_value,
    load_metamodel,
    serialize_metamodel,
)
from .representation import (
    MAP_KINDS,
    RepresentationSpec,
    check_representation_lipschitz,
    estimate_representation_lipschitz,
)

MODULE_INFO = {
    "display_name": "Structural meta-model",
    "description": "Typed tuple theta, environment metric D_E, admissible transforms, description length.",
    "type": "structure",
    "commands": ["simulate", "certify", "bound", "protocol"],
}
MODULE_NAME = "metamodel"


def get_setting_keys():
    return ["lipschitz_pairs", "representation_metric"]


def get_default_settings():
    """Return default settings for this module."""
    return {
        "lipschitz_pairs": 1000,
        "representation_metric": "absolute",
    }
