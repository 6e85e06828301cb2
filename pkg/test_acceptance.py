"""
End-to-end checks on the reference windows: the Hamming example, sumset
algebra, the Cayley-graph oracle, the powers-of-three pipeline, the
alternating-powers negative case, chains between far points, growth of
covering numbers and the swap / sign cross-check.
"""

import numpy as np
import pytest

from app.models.element import Element
from app.models.schemas import GroupSpec, SequenceKind, SequenceSpec, Verdict, Window
from app.services.balls import ball_service, cayley_distance
from app.services.ends import chain_service, evaluate_along, random_so_function, so_radius, verify_chain
from app.services.fs import (
    check_fs_strict,
    check_sign_condition,
    check_swap_condition,
    fs_collision_oracle,
    fs_extractor,
    fs_sum,
    mask_indices,
    prefix_from_indices,
)
from app.services.group import add, canonicalize, from_int, neg, sub
from app.services.hamming import embed_cube, verify_embedding

Z = GroupSpec(moduli_tail=0)
Z2 = GroupSpec(moduli_tail=2)
BASIS = SequenceSpec(kind=SequenceKind.BASIS)
POW2 = SequenceSpec(kind=SequenceKind.GEOMETRIC, ratio=2)
POW3 = SequenceSpec(kind=SequenceKind.GEOMETRIC, ratio=3)
ALT = SequenceSpec(kind=SequenceKind.ALTERNATING_GEOMETRIC, ratio=2)


def subset(mask: int) -> Element:
    return canonicalize(Z2, {i: 1 for i in mask_indices(mask)})


def test_basis_sumset_metric_is_hamming_metric():
    layers = ball_service.build_layers(Z2, BASIS, Window(generators=10, nmax=10))
    points = [subset(mask) for mask in range(1 << 10)]
    for i in range(len(points)):
        for j in range(i, len(points)):
            assert layers.dist(points[i], points[j]) == bin(i ^ j).count("1")


@pytest.mark.parametrize(
    "spec, seq, window",
    [
        (Z2, BASIS, Window(generators=8, nmax=4)),
        (Z, POW2, Window(generators=5, nmax=4)),
        (GroupSpec(moduli_head=(0,), moduli_tail=5), SequenceSpec(kind=SequenceKind.TABLE, table=("0:1", "1:1", "0:2 1:3", "2:1")), Window(generators=4, nmax=4)),
    ],
)
def test_sumset_algebra(spec, seq, window):
    layers = ball_service.build_layers(spec, seq, window)
    rng = np.random.default_rng(2024)
    for _ in range(400):
        i = int(rng.integers(0, layers.nmax + 1))
        j = int(rng.integers(0, layers.nmax - i + 1))
        first, second = layers.layer(i), layers.layer(j)
        x = first[int(rng.integers(0, len(first)))]
        y = second[int(rng.integers(0, len(second)))]
        assert layers.contains(add(spec, x, y), i + j)
        assert layers.contains(neg(spec, x), i)
        assert layers.contains(x, layers.nmax)

    shorter = ball_service.build_layers(spec, seq, Window(generators=window.generators - 1, nmax=window.nmax))
    for x in shorter.elements():
        assert layers.word_length(x) <= shorter.word_length(x)


@pytest.mark.parametrize(
    "spec, seq, window",
    [(Z2, BASIS, Window(generators=8, nmax=4)), (Z, POW2, Window(generators=5, nmax=4))],
)
def test_word_length_matches_cayley_graph(spec, seq, window):
    layers = ball_service.build_layers(spec, seq, window)
    for x in layers.layer(4):
        assert cayley_distance(spec, layers.generators, x, 4) == layers.word_length(x)


def test_powers_of_three_pipeline():
    layers = ball_service.build_layers(Z, POW3, Window(generators=8, nmax=7))
    prefix = fs_extractor.greedy_extract(Z, POW3, layers, 8)
    assert prefix.sources == tuple(range(8))
    assert prefix.terms == tuple(from_int(Z, 3 ** k) for k in range(8))

    assert check_fs_strict(prefix).passed
    assert fs_collision_oracle(prefix).passed
    assert check_sign_condition(prefix, layers).passed
    assert verify_embedding(prefix, layers, 6, 4).passed

    cert = embed_cube(prefix, layers, 5)
    assert cert.injective and cert.forward_ok and cert.exact_within
    within = cert.hamming <= layers.nmax
    assert np.array_equal(cert.distances[within], cert.hamming[within])


def test_alternating_powers_are_not_an_embedding():
    layers = ball_service.build_layers(Z, ALT, Window(generators=6, nmax=1))
    prefix = prefix_from_indices(Z, ALT, range(6))
    assert check_fs_strict(prefix).passed

    report = verify_embedding(prefix, layers, 5, 1)
    assert report.verdict == Verdict.FAIL
    ce = report.counterexample
    assert layers.contains(sub(Z, fs_sum(prefix, ce.H), fs_sum(prefix, ce.F)), 1)
    assert (ce.F, ce.H) == ((), (0, 1))
    assert len(set(ce.F) ^ set(ce.H)) > layers.word_length(ce.element)

    # 4 - 8 - (-2) = -2 is itself a term
    assert layers.contains(sub(Z, fs_sum(prefix, {2, 3}), fs_sum(prefix, {1})), 1)


def test_far_points_are_chained():
    layers = ball_service.build_layers(Z2, BASIS, Window(generators=16, nmax=8))
    rng = np.random.default_rng(7)
    m = 2

    fixtures = [random_so_function(m, layers, seed) for seed in range(20)]
    for f in fixtures:
        assert so_radius(f, layers).radius <= m

    for _ in range(50):
        endpoints = []
        for _ in range(2):
            weight = int(rng.integers(3, 7))
            support = rng.choice(16, size=weight, replace=False)
            endpoints.append(canonicalize(Z2, {int(i): 1 for i in support}))
        y, z = endpoints

        cert = chain_service.connect_chain(y, z, m, layers, BASIS)
        assert cert.requested_radius is None
        assert verify_chain(cert, layers, m).passed
        for f in fixtures:
            assert len(set(evaluate_along(cert, f))) == 1


def test_basis_is_not_of_bounded_geometry():
    layers = ball_service.build_layers(Z2, BASIS, Window(generators=12, nmax=4))
    lowers = [layers.covering_number(n).lower for n in (1, 2, 3, 4)]
    assert all(a < b for a, b in zip(lowers, lowers[1:]))


def random_table(rng: np.random.Generator, modulus: int, length: int) -> tuple:
    if modulus == 0:
        return tuple(f"0:{int(v)}" for v in rng.integers(-30, 31, size=length))
    coords = rng.integers(0, modulus, size=(length, 2))
    return tuple(f"0:{int(a)} 1:{int(b)}" for a, b in coords)


def test_swap_and_sign_conditions_agree():
    rng = np.random.default_rng(11)
    verdicts = []
    tries = 0
    while len(verdicts) < 200:
        tries += 1
        assert tries < 5000
        modulus = int(rng.choice([0, 0, 5, 7, 9]))
        length = int(rng.integers(2, 5))
        spec = GroupSpec(moduli_tail=modulus)
        seq = SequenceSpec(kind=SequenceKind.TABLE, table=random_table(rng, modulus, length))
        prefix = prefix_from_indices(spec, seq, range(length))
        if not fs_collision_oracle(prefix).passed:
            continue

        layers = ball_service.build_layers(spec, seq, Window(generators=length, nmax=length - 1))
        prefix = prefix.model_copy(update={"fs_strict_verified": True})
        sign = check_sign_condition(prefix, layers).passed
        swap = all(check_swap_condition(prefix, layers, n).passed for n in range(layers.nmax + 1))
        assert sign == swap, seq.table
        verdicts.append(sign)

    assert True in verdicts and False in verdicts
