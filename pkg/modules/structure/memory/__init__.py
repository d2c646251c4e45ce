"""
Memory module: memory state, update operator U and functional forgetting F.
Forgetting is constrained compression with summed code lengths as the
complexity proxy; protected items (required by the evaluative core) are never dropped.
"""

from .forgetting import (
    DEFAULT_EXACT_LIMIT,
    MEMORY_METRICS,
    UPDATE_RULES,
    MemoryItem,
    MemorySpec,
    MemoryState,
    additive_drop_loss,
    check_nonexpansive,
    forget,
    forget_with_report,
    memory_distance,
    memory_snapshot,
    update_memory,
)

MODULE_INFO = {
    "display_name": "Memory and forgetting",
    "description": "Memory update U, forgetting as constrained compression, non-expansiveness check.",
    "type": "structure",
    "commands": ["simulate", "certify"],
}
MODULE_NAME = "memory"


def get_setting_keys():
    return ["forget_exact_limit"]


def get_default_settings():
    """Return default settings for this module."""
    return {"forget_exact_limit": DEFAULT_EXACT_LIMIT}
