import numpy as np
import pytest

from schwinger_adapt.model import charge_operator, cp_unitary
from schwinger_adapt.pauli import PauliString, PauliSum, commutator, is_time_reversal_odd
from schwinger_adapt.pools import (
    POOL_IDS,
    TILED_IDS,
    TOPDOWN_IDS,
    OperatorPool,
    PoolOptions,
    Tile,
    all_time_reversal_odd,
    build_pool,
    build_topdown_pool,
    generator,
    odd_y_strings,
    seed_pool,
    select_tiles,
    surface_sign,
    synthesize_charge_conserving,
    tile_pool,
    tile_translation_invariant,
    volume_operator,
)

SIZES = {
    "LQZ": (3, 5, 7),
    "LxZ": (6, 10, 14),
    "xQZ": (4, 9, 16),
    "xxZ": (8, 18, 32),
}


@pytest.fixture(scope="module")
def tiles():
    return select_tiles("C")


def test_pool_ids():
    assert len(POOL_IDS) == 11
    assert set(TOPDOWN_IDS) | set(TILED_IDS) == set(POOL_IDS)


@pytest.mark.parametrize("pool_id", list(SIZES))
def test_pool_sizes(pool_id):
    assert tuple(len(build_topdown_pool(pool_id, L)) for L in (2, 3, 4)) == SIZES[pool_id]


def test_generator_form():
    g = generator(1, 2, True, 2)
    assert g.allclose(PauliSum.from_labels({"IXZY": 0.5, "IYZX": -0.5}))
    g = generator(0, 3, False, 2)
    assert g.allclose(PauliSum.from_labels({"XIIY": 0.5, "YIIX": -0.5}))
    with pytest.raises(ValueError):
        generator(2, 2, True, 2)


def test_volume_operator_staggering():
    v = volume_operator(1, True, 2)
    expect = generator(0, 1, True, 2) - generator(1, 1, True, 2) + generator(2, 1, True, 2)
    assert v.allclose(expect)


def _shift(s: PauliString, k: int) -> PauliString:
    return PauliString(s.n, s.x << k, s.z << k)


@pytest.mark.parametrize("pool_id", ["LQZ", "LQx", "LxZ", "Lxx"])
@pytest.mark.parametrize("L", [3, 4])
def test_volume_operators_shift_invariant(pool_id, L):
    n = 2 * L
    for o in build_topdown_pool(pool_id, L):
        if o.kind != "volume":
            continue
        for s in o.op.strings:
            if max(s.support) + 2 < n:
                assert o.op.coeff(_shift(s, 2)) == pytest.approx(o.op.coeff(s))


@pytest.mark.parametrize("pool_id", TOPDOWN_IDS)
@pytest.mark.parametrize("L", [2, 3, 4])
def test_symmetry_flags(pool_id, L):
    pool = build_topdown_pool(pool_id, L)
    Q = charge_operator(L)
    assert all_time_reversal_odd(pool)
    conserving = [commutator(o.op, Q).is_zero() for o in pool]
    if pool_id[1] == "Q":
        assert all(conserving)
    else:
        assert not any(conserving)
    if pool_id[2] == "Z":
        for o in pool:
            assert all(len(s.support) == o.distance + 1 for s in o.op.strings)


@pytest.mark.parametrize("pool_id", ["LQZ", "LQx"])
def test_q_lattice_pools_cp_symmetric(pool_id):
    u = cp_unitary(3)
    for o in build_topdown_pool(pool_id, 3):
        assert o.cp_symmetric
        m = o.op.to_matrix()
        assert np.allclose(u @ m @ u.T, m)


def test_surface_sign_values():
    assert surface_sign(1, True) == 1 and surface_sign(2, True) == -1
    assert surface_sign(1, False) == 1 and surface_sign(2, False) == 1


def test_pool_options():
    opts = PoolOptions(all_distances=True)
    assert opts.distance_set(2) == [1, 2, 3]
    assert PoolOptions().distance_set(3) == [1, 3, 5]
    assert PoolOptions(distances=[1, 9]).distance_set(2) == [1]
    assert PoolOptions.from_dict(opts.to_dict()) == opts
    with pytest.raises(ValueError):
        PoolOptions(surface_mode="x")
    with pytest.raises(ValueError):
        build_topdown_pool("LQZ", 3, {"t_relax": True})
    with pytest.raises(ValueError):
        build_topdown_pool("LQZ", 3, {"z_surface_swap": True})
    with pytest.raises(ValueError):
        build_topdown_pool("nope", 3)


def test_separate_surfaces_enlarge_pool():
    a = build_topdown_pool("LQZ", 3)
    b = build_topdown_pool("LQZ", 3, {"surface_mode": "separate"})
    assert len(b) > len(a)


def test_t_relax_adds_t_even_partners():
    base = build_topdown_pool("xQZ", 3)
    relaxed = build_topdown_pool("xQZ", 3, {"t_relax": True})
    assert len(relaxed) == 2 * len(base)
    even = [o for o in relaxed if not is_time_reversal_odd(o.op)]
    assert len(even) == len(base)
    Q = charge_operator(3)
    assert all(commutator(o.op, Q).is_zero() for o in even)


def test_z_surface_swap_keeps_z_on_surfaces():
    pool = build_topdown_pool("LQx", 3, {"z_surface_swap": True})
    for o in pool:
        if o.kind == "surface":
            assert all(len(s.support) == o.distance + 1 for s in o.op.strings)


@pytest.mark.parametrize("pool_id", TOPDOWN_IDS)
def test_pool_dump_round_trip(pool_id):
    pool = build_topdown_pool(pool_id, 3, {"t_relax": True} if pool_id[0] == "x" else None)
    back = OperatorPool.loads(pool.dumps())
    assert back.pool_id == pool.pool_id and back.options == pool.options
    assert [o.label for o in back] == [o.label for o in pool]
    assert all(a.op.allclose(b.op) for a, b in zip(back, pool))
    assert back.dumps() == pool.dumps()


def test_pool_loads_errors():
    with pytest.raises(ValueError):
        OperatorPool.loads("nothing")
    with pytest.raises(ValueError):
        OperatorPool.loads("pool LQZ L=2\nop kind=local d=1 offset=0 cp=0 label=a\n0.5 XYII\n")


def test_seed_pool():
    pool = seed_pool()
    assert len(pool) == 120 == len(odd_y_strings(4))
    assert all_time_reversal_odd(pool)


def test_tile_rejects_even_y():
    with pytest.raises(ValueError):
        Tile(PauliString.from_label("XXYY"))
    t = Tile(PauliString.from_label("XY"))
    assert t.embed(2, 4).label == "IIXY"
    with pytest.raises(ValueError):
        t.embed(3, 4)


def test_select_tiles_are_odd_y_four_qubit(tiles):
    assert tiles
    for t in tiles:
        assert t.width == 4 and t.string.y_count % 2 == 1


def test_select_tiles_deterministic(tiles):
    assert [t.string for t in select_tiles("C")] == [t.string for t in tiles]


@pytest.mark.parametrize("L", [3, 4])
def test_tiled_pools(tiles, L):
    Q = charge_operator(L)
    for pid in TILED_IDS:
        pool = build_pool(pid, L, tiles=tiles)
        assert all_time_reversal_odd(pool)
        assert all(o.provenance for o in pool)
    for o in synthesize_charge_conserving(tiles, L):
        assert commutator(o.op, Q).is_zero()


def test_quartet_synthesis_spans_printed_operator():
    quartet = [Tile(PauliString.from_label(s)) for s in ("ZIXY", "IZXY", "ZIYX", "IZYX")]
    pool = synthesize_charge_conserving(quartet, 2)
    target = PauliSum.from_labels({"ZIXY": 0.25, "IZXY": -0.25, "ZIYX": -0.25, "IZYX": 0.25})
    basis = [o.op for o in pool]
    keys = sorted({k for o in basis + [target] for k, _ in o.items()})
    A = np.array([[o.coeff(PauliString(4, *k)).real for o in basis] for k in keys])
    b = np.array([target.coeff(PauliString(4, *k)).real for k in keys])
    c, *_ = np.linalg.lstsq(A, b, rcond=None)
    assert np.allclose(A @ c, b, atol=1e-12)


def test_tile_l_surface_mirror():
    t = [Tile(PauliString.from_label("XY"))]
    pool = tile_translation_invariant(t, 4)
    surf = [o for o in pool if o.kind == "surface"]
    labels = {o.label for o in surf}
    assert "S1[XY]" in labels
    s1 = next(o for o in surf if o.label == "S1[XY]")
    assert {s.label for s in s1.op.strings} == {"XYIIIIII", "IIIIIIXY"}


def test_tile_pool_dedupes(tiles):
    pool = tile_pool(tiles, 2)
    assert len({o.op.key() for o in pool}) == len(pool)


def test_build_pool_needs_tiles():
    with pytest.raises(ValueError):
        build_pool("tile_Q", 3)
    with pytest.raises(ValueError):
        build_pool("other", 3)
