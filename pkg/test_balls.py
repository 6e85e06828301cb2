"""Sumset layers: sizes, word lengths, decompositions, covering bounds and the cache."""

from itertools import product

import pytest
from hypothesis import given, settings, strategies as st

from app.models.element import Element, ZERO
from app.models.errors import InvalidInputError, LayerBudgetExceededError, LayersTooShallowError, OutsideWindowError
from app.models.schemas import GroupSpec, SequenceKind, SequenceSpec, Window
from app.services.balls import SumsetLayers, ball_service, cayley_distance
from app.services.cache import LayerCache, layers_key
from app.services.group import add, canonicalize, from_int, neg, total

Z = GroupSpec(moduli_tail=0)
Z2 = GroupSpec(moduli_tail=2)
BASIS = SequenceSpec(kind=SequenceKind.BASIS)
POW2 = SequenceSpec(kind=SequenceKind.GEOMETRIC, ratio=2)


def n(value: int) -> Element:
    return from_int(Z, value)


def e(*indices: int) -> Element:
    return canonicalize(Z2, {i: 1 for i in indices})


@pytest.fixture(scope="module")
def hamming8():
    return ball_service.build_layers(Z2, BASIS, Window(generators=8, nmax=4))


@pytest.fixture(scope="module")
def pow2():
    return ball_service.build_layers(Z, POW2, Window(generators=4, nmax=3))


# --- build_layers / growth_profile ---

def test_binomial_growth(hamming8):
    assert hamming8.growth_profile() == [1, 9, 37, 93, 163]


def test_depth_zero_is_identity_only():
    layers = ball_service.build_layers(Z, POW2, Window(generators=4, nmax=0))
    assert layers.layer(0) == [ZERO]
    assert layers.growth_profile() == [1]


def test_first_layer_is_alphabet():
    layers = ball_service.build_layers(Z, POW2, Window(generators=4, nmax=1))
    assert layers.layer(1) == sorted(n(v) for v in (0, 1, -1, 2, -2, 4, -4, 8, -8))
    assert layers.sizes[1] == 9
    assert list(layers.alphabet) == layers.layer(1)


def test_pairwise_sums_profile():
    layers = ball_service.build_layers(Z, POW2, Window(generators=4, nmax=2))
    assert layers.growth_profile() == [1, 9, 25]  # magnitudes 1..10, 12, 16


def test_saturated_group_stops_growing():
    layers = ball_service.build_layers(GroupSpec(moduli_tail=3), BASIS, Window(generators=2, nmax=6))
    assert layers.growth_profile() == [1, 5, 9, 9, 9, 9, 9]


def test_cardinality_cap_reports_depth():
    with pytest.raises(LayerBudgetExceededError) as exc:
        ball_service.build_layers(Z2, BASIS, Window(generators=8, nmax=4), cap=50)
    assert exc.value.depth_reached == 2
    assert exc.value.size == 37
    assert exc.value.exit_status == 2


def test_zero_cap_and_workers_are_rejected():
    with pytest.raises(InvalidInputError):
        ball_service.build_layers(Z2, BASIS, Window(generators=4, nmax=2), cap=0)
    with pytest.raises(InvalidInputError):
        ball_service.build_layers(Z2, BASIS, Window(generators=4, nmax=2), workers=0)


def test_parallel_build_matches_sequential(hamming8):
    service = type(ball_service)()
    service.chunk_size = 7
    parallel = service.build_layers(Z2, BASIS, Window(generators=8, nmax=4), workers=2)
    assert parallel.depth == hamming8.depth
    assert parallel.parent == hamming8.parent


# --- word_length / dist / decompose ---

def test_word_length_is_hamming_weight(hamming8):
    assert hamming8.word_length(e(0, 3, 5)) == 3
    assert hamming8.word_length(ZERO) == 0


def test_word_length_unknown_beyond_window(hamming8):
    assert hamming8.word_length(e(0, 1, 2, 3, 4)) is None
    assert hamming8.word_length(e(9)) is None


def test_word_length_of_seven(pow2):
    assert pow2.word_length(n(7)) == 2  # 8 - 1


def test_word_length_seven_without_eight():
    layers = ball_service.build_layers(Z, POW2, Window(generators=3, nmax=3))
    assert layers.word_length(n(7)) == 3


def test_dist_examples(hamming8, pow2):
    assert hamming8.dist(e(2), e(2)) == 0
    assert hamming8.dist(e(0), e(1)) == 2
    assert pow2.dist(n(5), n(4)) == 1


def test_in_entourage(hamming8):
    assert hamming8.in_entourage(e(0), e(1), 2) is True
    assert hamming8.in_entourage(e(0), e(1), 1) is False
    assert hamming8.in_entourage(e(0, 1, 2), e(3, 4), 4) is False
    assert hamming8.in_entourage(e(0, 1, 2), e(3, 4), 6) is None


def test_decompose_basis(hamming8):
    assert sorted(hamming8.decompose(e(2, 5))) == [e(2), e(5)]
    assert hamming8.decompose(ZERO) == []


def test_decompose_three(pow2):
    summands = pow2.decompose(n(3))
    assert len(summands) == 2
    assert total(Z, summands) == n(3)
    assert all(pow2.in_alphabet(s) for s in summands)


def test_decompose_outside_window(hamming8):
    with pytest.raises(OutsideWindowError):
        hamming8.decompose(e(0, 1, 2, 3, 4))


def test_every_decomposition_is_shortest(pow2):
    for x in pow2.layer(3):
        summands = pow2.decompose(x)
        assert len(summands) == pow2.word_length(x)
        assert total(Z, summands) == x


# --- balls / ideal members ---

def test_ball_is_translate(hamming8):
    ball = hamming8.ball(e(0), 1)
    assert ball == {add(Z2, e(0), y) for y in hamming8.layer(1)}
    assert ZERO in ball and e(0, 5) in ball


def test_ideal_member_is_union_of_balls(hamming8):
    member = hamming8.ideal_member([e(0), e(7)], 1)
    assert member == hamming8.ball(e(0), 1) | hamming8.ball(e(7), 1)


def test_layer_depth_checked(hamming8):
    with pytest.raises(LayersTooShallowError):
        hamming8.layer(5)
    with pytest.raises(InvalidInputError):
        hamming8.sphere(-1)


def test_spheres_partition_layers(hamming8):
    assert sum(len(hamming8.sphere(k)) for k in range(5)) == len(hamming8)


# --- covering_number ---

def test_covering_trivial_depths(hamming8):
    zero = hamming8.covering_number(0)
    one = hamming8.covering_number(1)
    assert (zero.lower, zero.upper) == (1, 1)
    assert (one.lower, one.upper) == (1, 1)


def test_covering_bounds_bracket(hamming8):
    for depth in range(5):
        bounds = hamming8.covering_number(depth)
        assert bounds.lower <= bounds.upper
        assert bounds.lower == max(bounds.packing, bounds.volume_bound)


def test_covering_lower_bounds_grow():
    layers = ball_service.build_layers(Z2, BASIS, Window(generators=12, nmax=3))
    lowers = [layers.covering_number(k).lower for k in (1, 2, 3)]
    assert lowers == [1, 7, 23]


# --- Cayley graph cross-check ---

def test_cayley_distance_matches_word_length(pow2):
    for x in pow2.layer(3):
        assert cayley_distance(Z, pow2.generators, x, 3) == pow2.word_length(x)


def test_cayley_distance_limit():
    assert cayley_distance(Z, [n(2)], n(1), 10) is None
    assert cayley_distance(Z, [n(1)], n(5), 4) is None
    assert cayley_distance(Z, [n(1)], n(5), 5) == 5


# --- sumset algebra ---

@pytest.fixture(scope="module")
def mixed():
    spec = GroupSpec(moduli_head=(0,), moduli_tail=3)
    seq = SequenceSpec(kind=SequenceKind.TABLE, table=("0:1", "1:1", "0:3 2:1", "0:-2 1:2"))
    return ball_service.build_layers(spec, seq, Window(generators=4, nmax=4))


@settings(max_examples=150, deadline=None)
@given(st.data())
def test_sumset_inclusion(mixed, data):
    i = data.draw(st.integers(0, 2))
    j = data.draw(st.integers(0, mixed.nmax - i))
    x = data.draw(st.sampled_from(mixed.layer(i)))
    y = data.draw(st.sampled_from(mixed.layer(j)))
    assert mixed.contains(add(mixed.spec, x, y), i + j)


def test_layers_symmetric_and_monotone(mixed):
    previous = set()
    for k in range(mixed.nmax + 1):
        layer = set(mixed.layer(k))
        assert {neg(mixed.spec, x) for x in layer} == layer
        assert previous <= layer
        previous = layer


def test_monotone_in_generators():
    small = ball_service.build_layers(Z, POW2, Window(generators=3, nmax=3))
    large = ball_service.build_layers(Z, POW2, Window(generators=5, nmax=3))
    for x in small.layer(3):
        assert large.word_length(x) <= small.word_length(x)


def test_brute_force_layer_two():
    layers = ball_service.build_layers(Z, POW2, Window(generators=4, nmax=2))
    alphabet = layers.alphabet
    brute = {add(Z, a, b) for a, b in product(alphabet, alphabet)}
    assert set(layers.layer(2)) == brute


# --- serialization and cache ---

def test_text_form_rebuilds_same_layers(hamming8):
    again = SumsetLayers.from_text(hamming8.to_text(), Z2, BASIS, hamming8.window)
    assert again.depth == hamming8.depth
    assert again.parent == hamming8.parent
    assert again.sizes == hamming8.sizes


def test_text_form_rejects_other_window(hamming8):
    with pytest.raises(InvalidInputError):
        SumsetLayers.from_text(hamming8.to_text(), Z2, BASIS, Window(generators=8, nmax=3))


def test_cache_hit_equals_build(tmp_path):
    cache = LayerCache(cache_dir=str(tmp_path), enabled=True)
    window = Window(generators=5, nmax=3)
    built = cache.get_or_build(Z, POW2, window)
    assert cache.path_for(Z, POW2, window).exists()
    loaded = cache.load(Z, POW2, window)
    assert loaded is not None
    assert loaded.depth == built.depth
    assert loaded.to_text() == built.to_text()


def test_corrupt_cache_entry_is_rebuilt(tmp_path):
    cache = LayerCache(cache_dir=str(tmp_path), enabled=True)
    window = Window(generators=3, nmax=2)
    cache.path_for(Z, POW2, window).write_text("garbage\n", encoding="utf-8")
    assert cache.load(Z, POW2, window) is None
    layers = cache.get_or_build(Z, POW2, window)
    assert layers.growth_profile() == ball_service.build_layers(Z, POW2, window).growth_profile()


def test_disabled_cache_writes_nothing(tmp_path):
    cache = LayerCache(cache_dir=str(tmp_path / "c"), enabled=False)
    cache.get_or_build(Z, POW2, Window(generators=3, nmax=1))
    assert not (tmp_path / "c").exists()


def test_cache_key_depends_on_every_input():
    window = Window(generators=4, nmax=2)
    keys = {
        layers_key(Z, POW2, window),
        layers_key(Z2, POW2, window),
        layers_key(Z, BASIS, window),
        layers_key(Z, POW2, Window(generators=4, nmax=3)),
    }
    assert len(keys) == 4


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
