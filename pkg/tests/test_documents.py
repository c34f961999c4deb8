import json
from fractions import Fraction

import pytest

from treeflow import InputError, parse_instance, serialize_instance, solve
from treeflow.documents import (
    format_rational,
    parse_rational,
    parse_result,
    serialize_result,
)
from treeflow.generator import generate_instance, generate_network


def test_rational_round_trip():
    for x in [Fraction(0), Fraction(3), Fraction(1, 2), Fraction(-7, 3)]:
        assert parse_rational(format_rational(x)) == x
    assert parse_rational(5) == 5
    with pytest.raises(InputError):
        parse_rational("1/0")
    with pytest.raises(InputError):
        parse_rational("zebra")


def test_instance_round_trip(e1):
    net, real = e1
    text = serialize_instance(net, real)
    net2, real2 = parse_instance(text)
    assert net2.terminals == net.terminals
    assert net2.capacity == net.capacity
    assert real2.arc_length == real.arc_length
    assert real2.subtrees == real.subtrees
    assert serialize_instance(net2, real2) == text


def test_parse_error_codes():
    with pytest.raises(InputError) as e:
        parse_instance("{not json")
    assert e.value.code == "malformed-document"

    doc = {
        "graph": {"vertices": ["s", "t"], "arcs": [{"id": "a", "tail": "s", "head": "t", "cap": 1}]},
        "terminals": ["s", "t"],
        "tree": {"vertices": ["v1", "v2"], "edges": [{"u": "v1", "v": "v2", "len_uv": 1, "len_vu": 0}]},
        "subtrees": {"s": ["v1"], "t": ["nowhere"]},
    }
    with pytest.raises(InputError) as e:
        parse_instance(json.dumps(doc))
    assert e.value.code == "dangling-reference"

    doc["subtrees"]["t"] = ["v2"]
    doc["graph"]["arcs"][0]["cap"] = -2
    with pytest.raises(InputError) as e:
        parse_instance(json.dumps(doc))
    assert e.value.code == "negative-capacity"

    doc["graph"]["arcs"][0]["cap"] = 1
    doc["subtrees"]["t"] = ["v2", "nope"]
    with pytest.raises(InputError):
        parse_instance(json.dumps(doc))

    # disconnected subtree
    doc2 = {
        "graph": {"vertices": ["s"], "arcs": []},
        "terminals": ["s"],
        "tree": {"vertices": ["a", "b", "c"],
                 "edges": [{"u": "a", "v": "b", "len_uv": 1, "len_vu": 1},
                           {"u": "b", "v": "c", "len_uv": 1, "len_vu": 1}]},
        "subtrees": {"s": ["a", "c"]},
    }
    with pytest.raises(InputError) as e:
        parse_instance(json.dumps(doc2))
    assert e.value.code == "disconnected-subtree"


def test_result_round_trip(e1):
    net, real = e1
    out = solve(net, real)
    paths = out.multiflow.to_paths(net)
    text = serialize_result(out.value, paths, out.certificate, {"n": 2})
    value, paths2, cert2 = parse_result(text)
    assert value == out.value
    assert [(p.source, p.target, p.arcs, p.weight) for p in paths2] == \
           [(p.source, p.target, p.arcs, p.weight) for p in paths]
    assert cert2.cuts == out.certificate.cuts


def test_generator_determinism_and_validity():
    a = generate_instance(7, 30, 10, 4, 4)
    b = generate_instance(7, 30, 10, 4, 4)
    assert json.dumps(a) == json.dumps(b)
    c = generate_instance(8, 30, 10, 4, 4)
    assert json.dumps(a) != json.dumps(c)


def test_generator_zero_walks_is_trivially_optimal():
    net, real = generate_network(3, 6, 0, 0, 3)
    assert all(c == 0 for c in net.capacity.values())
    out = solve(net, real)
    assert out.value == 0


def test_generated_instances_validate():
    from treeflow import validate_instance
    for seed in range(40):
        net, real = generate_network(seed, 20 + seed, 8, 3, 2 + seed % 6)
        assert validate_instance(net, real) is None
