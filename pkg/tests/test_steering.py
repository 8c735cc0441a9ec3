import numpy as np
import pytest

from sneuron.atlas import NeuronAtlas
from sneuron.errors import InputError
from sneuron.model import forward
from sneuron.steering import POLICY_NAMES, DeactivationPolicy, build_mask, mask_for


def toy_atlas():
    top_a = ((0, 1, 0.9), (0, 2, 0.5), (1, 0, 0.4))
    top_b = ((1, 0, 0.8), (1, 3, 0.7))
    return NeuronAtlas("A", "B", 3, 2, 4, 3, 2, top_a, top_b)


def test_named_policies():
    atlas = toy_atlas()
    assert len(mask_for(atlas, "none")) == 0
    assert mask_for(atlas, "source").coords == {(0, 1), (0, 2)}
    assert mask_for(atlas, "target").coords == {(1, 3)}
    assert mask_for(atlas, "both").coords == {(0, 1), (0, 2), (1, 3)}
    assert mask_for(atlas, "source", source="B").coords == {(1, 3)}


def test_both_is_disjoint_union():
    atlas = toy_atlas()
    both = mask_for(atlas, "both")
    assert len(both) == len(atlas.only_a) + len(atlas.only_b)


@pytest.mark.parametrize("name", POLICY_NAMES)
def test_masks_never_touch_overlap(name):
    atlas = toy_atlas()
    assert not (mask_for(atlas, name).coords & atlas.overlap)


def test_policy_errors():
    with pytest.raises(InputError):
        DeactivationPolicy.named("half", "A", "B")
    with pytest.raises(InputError):
        build_mask(toy_atlas(), DeactivationPolicy.named("source", "A", "C"))
    with pytest.raises(InputError):
        mask_for(toy_atlas(), "source", source="Z")


def test_source_mask_lowers_source_mass(fixture, planted, planted_atlas):
    w, _ = planted
    mask = mask_for(planted_atlas, "source")
    a = sorted(fixture.lexicon_a)
    for prompt in fixture.tokens(fixture.prompts_a[:20]):
        before = forward(w, prompt)[0].final[a].sum()
        after = forward(w, prompt, mask)[0].final[a].sum()
        assert after < before
