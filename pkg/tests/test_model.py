"""Core model: bubble lifecycle, annotation semantics, expiry and pinning."""

from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scriptmeet import model
from scriptmeet.model import (
    Annotation,
    Edit,
    EmptyTagLabel,
    EditNotRemovable,
    EditOnInterim,
    ExpiryPolicy,
    HiddenBubble,
    Highlight,
    InvalidRange,
    Like,
    NotAnnotationAuthor,
    Tag,
    UserToken,
)


def make_finalized(bubble_id="b1", speaker="amy", text="hello world", t0=0.0, t1=2.0, at=10.0):
    return model.finalize_bubble(
        None, bubble_id=bubble_id, speaker=speaker, text=text, t_start=t0, t_end=t1,
        finalized_at=at, seq=1,
    )


def ann(body, bubble="b1", author="bob", seq=2, aid="a1"):
    return Annotation(annotation_id=aid, bubble_id=bubble, author=author, body=body, seq=seq)


class TestUserToken:
    def test_requires_display_name(self):
        with pytest.raises(ValueError):
            UserToken(token="t1", display_name="   ")

    def test_requires_token(self):
        with pytest.raises(ValueError):
            UserToken(token="", display_name="Amy")


class TestApplyAnnotation:
    def test_like_pins_fresh_bubble(self):
        bubble = make_finalized()
        assert not bubble.ever_interacted
        liked = model.apply_annotation(bubble, ann(Like()))
        assert liked.ever_interacted
        assert model.like_count([ann(Like())]) == 1

    def test_tag_applied_twice_counts_once_with_count_two(self):
        # One tag can be applied repeatedly; the label shows a count.
        a1 = ann(Tag("Agreed Product"), author="bob", seq=2, aid="a1")
        a2 = ann(Tag("Agreed Product"), author="cat", seq=3, aid="a2")
        counts = model.tag_counts([a1, a2])
        assert counts == {"Agreed Product": 2}

    def test_tag_labels_are_case_sensitive(self):
        counts = model.tag_counts([ann(Tag("To-do"), aid="a1"), ann(Tag("to-do"), aid="a2")])
        assert counts == {"To-do": 1, "to-do": 1}

    def test_edit_appends_revision_and_updates_text(self):
        bubble = make_finalized(text="turn on the smart lite")
        assert len(bubble.revisions) == 1
        edited = model.apply_annotation(bubble, ann(Edit("turn on the smart light"), seq=5))
        assert len(edited.revisions) == 2
        assert edited.text == "turn on the smart light"
        assert edited.revisions[0].text == "turn on the smart lite"
        assert edited.revisions[1].editor == "bob"

    def test_edit_on_interim_rejected(self):
        bubble = model.new_interim_bubble("b1", "amy", "hel", 0.0)
        with pytest.raises(EditOnInterim):
            model.apply_annotation(bubble, ann(Edit("hello")))

    def test_like_on_interim_allowed(self):
        bubble = model.new_interim_bubble("b1", "amy", "hel", 0.0)
        assert model.apply_annotation(bubble, ann(Like())).ever_interacted

    def test_annotation_on_hidden_rejected(self):
        hidden = model.hide_bubble(make_finalized())
        with pytest.raises(HiddenBubble):
            model.apply_annotation(hidden, ann(Like()))

    def test_highlight_range_must_fit_text(self):
        bubble = make_finalized(text="hello world")  # length 11
        ok = model.apply_annotation(bubble, ann(Highlight("yellow", 0, 5)))
        assert ok.ever_interacted
        for start, end in [(0, 12), (-1, 5), (5, 5), (7, 3)]:
            with pytest.raises(InvalidRange):
                model.apply_annotation(bubble, ann(Highlight("yellow", start, end)))

    def test_highlight_color_must_be_known(self):
        with pytest.raises(model.UnknownColor):
            model.apply_annotation(make_finalized(), ann(Highlight("mauve", 0, 3)))

    def test_empty_tag_label_rejected(self):
        with pytest.raises(EmptyTagLabel):
            model.apply_annotation(make_finalized(), ann(Tag("   ")))


class TestRemoval:
    def test_author_may_remove_own(self):
        model.check_removal(ann(Like(), author="bob"), remover="bob")

    def test_other_author_rejected(self):
        with pytest.raises(NotAnnotationAuthor):
            model.check_removal(ann(Like(), author="bob"), remover="cat")

    def test_edits_never_removable(self):
        with pytest.raises(EditNotRemovable):
            model.check_removal(ann(Edit("x"), author="bob"), remover="bob")


class TestSweepExpiry:
    def test_boundary_at_exact_ttl(self):
        bubble = make_finalized(at=0.0)
        policy = ExpiryPolicy(ttl_seconds=180.0)
        assert model.sweep_expiry([bubble], 179.9, policy) == set()
        assert model.sweep_expiry([bubble], 180.0, policy) == {"b1"}

    def test_one_like_pins_forever(self):
        bubble = model.apply_annotation(make_finalized(at=0.0), ann(Like()))
        assert model.sweep_expiry([bubble], 10_000.0, ExpiryPolicy()) == set()

    def test_interim_exempt(self):
        bubble = model.new_interim_bubble("b1", "amy", "hi", 0.0)
        assert model.sweep_expiry([bubble], 500.0, ExpiryPolicy()) == set()

    def test_resweep_of_hidden_is_noop(self):
        bubble = model.hide_bubble(make_finalized(at=0.0))
        assert model.sweep_expiry([bubble], 10_000.0, ExpiryPolicy()) == set()

    def test_ttl_must_be_positive(self):
        with pytest.raises(ValueError):
            ExpiryPolicy(ttl_seconds=0)


# --- property tests -------------------------------------------------------

interaction_times = st.lists(st.floats(min_value=0, max_value=1000), min_size=0, max_size=8)


@settings(max_examples=200)
@given(
    finalized_at=st.floats(min_value=0, max_value=1000),
    now=st.floats(min_value=0, max_value=5000),
    ttl=st.floats(min_value=0.1, max_value=1000),
    interacted=st.booleans(),
)
def test_expiry_soundness_and_completeness(finalized_at, now, ttl, interacted):
    bubble = make_finalized(at=finalized_at)
    if interacted:
        bubble = model.apply_annotation(bubble, ann(Like()))
    expired = model.sweep_expiry([bubble], now, ExpiryPolicy(ttl_seconds=ttl))
    should_hide = (not interacted) and (now - finalized_at >= ttl)
    assert (bubble.bubble_id in expired) == should_hide


@settings(max_examples=100)
@given(st.data())
def test_pinning_is_permanent_even_after_removal(data):
    # Interact once, remove the interaction, sweep far in the future: the
    # pin must not be recomputed from the live annotation count.
    bubble = make_finalized(at=0.0)
    liked = model.apply_annotation(bubble, ann(Like(), aid="a9"))
    # removal only checks permissions; the pin flag stays on the bubble
    model.check_removal(ann(Like(), aid="a9"), remover="bob")
    later = data.draw(st.floats(min_value=0, max_value=100_000))
    assert model.sweep_expiry([liked], later, ExpiryPolicy()) == set()


@settings(max_examples=100)
@given(edits=st.lists(st.text(min_size=1, max_size=12), min_size=0, max_size=6))
def test_revisions_append_only(edits):
    bubble = make_finalized(text="as transcribed")
    seen: list[tuple[str, ...]] = [tuple(r.text for r in bubble.revisions)]
    for i, new_text in enumerate(edits):
        bubble = model.apply_annotation(bubble, ann(Edit(new_text), seq=10 + i, aid=f"e{i}"))
        seen.append(tuple(r.text for r in bubble.revisions))
    for earlier, later in zip(seen, seen[1:]):
        assert later[: len(earlier)] == earlier
        assert len(later) == len(earlier) + 1
    assert bubble.text == (edits[-1] if edits else "as transcribed")


@settings(max_examples=100)
@given(ops=st.lists(st.tuples(st.booleans(), st.sampled_from(["To-do", "Idea", "Q"])), max_size=30))
def test_tag_count_conservation(ops):
    # Applied minus removed, never negative.
    live: dict[str, Annotation] = {}
    applied: dict[str, int] = {}
    removed: dict[str, int] = {}
    for i, (is_apply, label) in enumerate(ops):
        if is_apply or not live:
            a = ann(Tag(label), seq=i, aid=f"t{i}")
            live[a.annotation_id] = a
            applied[label] = applied.get(label, 0) + 1
        else:
            aid = sorted(live)[0]
            removed_ann = live.pop(aid)
            assert isinstance(removed_ann.body, Tag)
            removed[removed_ann.body.label] = removed.get(removed_ann.body.label, 0) + 1
    counts = model.tag_counts(live.values())
    for label in set(applied) | set(removed):
        expected = applied.get(label, 0) - removed.get(label, 0)
        assert counts.get(label, 0) == expected
        assert counts.get(label, 0) >= 0
