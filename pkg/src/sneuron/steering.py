"""Deactivation masks from an atlas.

Only exclusive neurons are ever masked; neurons in both styles' top-k sets
stay active. Masks span every layer the atlas covers.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .atlas import NeuronAtlas
from .errors import InputError
from .model import DeactivationMask

POLICY_NAMES = ("none", "source", "target", "both")


@dataclass(frozen=True)
class DeactivationPolicy:
    deactivate_source: bool
    deactivate_target: bool
    source: str
    target: str

    @classmethod
    def named(cls, name: str, source: str, target: str) -> "DeactivationPolicy":
        """Policy from its CLI name: none, source, target or both."""
        if name not in POLICY_NAMES:
            raise InputError(f"deactivation policy must be one of {POLICY_NAMES}, got {name!r}")
        return cls(name in ("source", "both"), name in ("target", "both"), source, target)


def build_mask(atlas: NeuronAtlas, policy: DeactivationPolicy) -> DeactivationMask:
    if {policy.source, policy.target} != set(atlas.styles):
        raise InputError(
            f"policy direction {policy.source!r} -> {policy.target!r} does not match "
            f"atlas styles {atlas.styles}"
        )
    coords = set()
    if policy.deactivate_source:
        coords |= atlas.exclusive(policy.source)
    if policy.deactivate_target:
        coords |= atlas.exclusive(policy.target)
    return DeactivationMask(frozenset(coords))


def mask_for(atlas: NeuronAtlas, name: str, source: Optional[str] = None) -> DeactivationMask:
    """Shortcut: ``source`` defaults to the atlas's first style."""
    source = atlas.style_a if source is None else source
    if source not in atlas.styles:
        raise InputError(f"style {source!r} not in atlas styles {atlas.styles}")
    target = atlas.style_b if source == atlas.style_a else atlas.style_a
    return build_mask(atlas, DeactivationPolicy.named(name, source, target))
