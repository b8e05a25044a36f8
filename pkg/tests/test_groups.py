import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eccar.exceptions import InvalidPartition
from eccar.groups import (block_partition, elementwise_partition, format_partition,
                          load_partition, parse_partition, partition_by_name,
                          partition_from_groups, row_partition, validate_partition)


def test_ragged_blocks_sizes():
    part = block_partition(5, 5, 2, 2)
    assert part.n_groups == 9
    assert part.sizes.tolist() == [4, 4, 2, 4, 4, 2, 2, 2, 1]
    assert validate_partition(part)


def test_block_one_by_one_is_elementwise():
    assert block_partition(3, 3, 1, 1).same_as(elementwise_partition(3, 3))
    assert block_partition(3, 3, 1, 1).n_groups == 9


def test_single_group_covering_all():
    part = block_partition(4, 3, 4, 3)
    assert part.n_groups == 1
    assert part.sizes.tolist() == [12]


def test_rows_partition():
    part = row_partition(3, 4)
    assert part.sizes.tolist() == [4, 4, 4]
    assert sorted(map(tuple, part.groups[1].tolist())) == [(1, j) for j in range(4)]


@pytest.mark.parametrize("bp,bq", [(0, 2), (2, 0)])
def test_bad_block_size(bp, bq):
    with pytest.raises(InvalidPartition):
        block_partition(4, 4, bp, bq)


def test_validation_rejects_overlap_gap_range_empty():
    full = [[(0, 0), (0, 1)], [(1, 0), (1, 1)]]
    assert validate_partition(partition_from_groups(2, 2, full))
    assert not validate_partition(partition_from_groups(2, 2, [[(0, 0), (0, 1)], [(0, 1), (1, 0), (1, 1)]]))
    assert not validate_partition(partition_from_groups(2, 2, [[(0, 0), (0, 1)], [(1, 0)]]))
    assert not validate_partition(partition_from_groups(2, 2, full + [[(2, 0)]]))
    assert not validate_partition(partition_from_groups(2, 2, full + [[]]))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 12), st.integers(1, 12), st.integers(1, 6), st.integers(1, 6))
def test_blocks_always_valid(p, q, bp, bq):
    part = block_partition(p, q, bp, bq)
    assert validate_partition(part)
    assert part.sizes.sum() == p * q
    assert part.n_groups == -(-p // bp) * -(-q // bq)


def test_group_norms_match_loop(rng):
    m = rng.standard_normal((5, 7))
    part = block_partition(5, 7, 2, 3)
    expected = [np.linalg.norm(m[g[:, 0], g[:, 1]]) for g in part.groups]
    np.testing.assert_allclose(part.group_norms(m), expected, rtol=1e-14)


def test_parse_roundtrip(tmp_path):
    text = "# two groups\n0,0;0,1\n\n1,0;1,1\n"
    part = parse_partition(text, 2, 2)
    assert part.n_groups == 2
    assert part.same_as(row_partition(2, 2))
    path = tmp_path / "g.txt"
    path.write_text(format_partition(part))
    assert load_partition(path, 2, 2).same_as(part)
    assert partition_by_name(f"file:{path}", 2, 2).same_as(part)


def test_parse_errors():
    with pytest.raises(InvalidPartition, match="line 1"):
        parse_partition("0,x\n", 2, 2)
    with pytest.raises(InvalidPartition):
        parse_partition("0,0;0,1\n", 2, 2)


def test_by_name():
    assert partition_by_name("elementwise", 3, 2).is_elementwise
    assert partition_by_name("rows", 3, 2).n_groups == 3
    assert partition_by_name("blocks:2x2", 5, 5).n_groups == 9
    with pytest.raises(InvalidPartition):
        partition_by_name("blocks:2", 5, 5)
    with pytest.raises(InvalidPartition):
        partition_by_name("columns", 5, 5)


def test_large_elementwise_is_cheap():
    part = elementwise_partition(1000, 1000)
    assert part.is_elementwise
    assert part.n_groups == 10 ** 6
