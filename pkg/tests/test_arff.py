import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from zerofolio.arff import NOMINAL, NUMERIC, STRING, Attribute, Relation, dump_arff, parse_arff
from zerofolio.errors import MalformedArff

SAMPLE = """% ASlib style
@RELATION ALGORITHM_RUNS

@ATTRIBUTE instance_id STRING
@ATTRIBUTE repetition NUMERIC
@attribute algorithm string
@ATTRIBUTE runtime REAL
@ATTRIBUTE runstatus {ok, timeout, memout}

@DATA
inst1,1,minisat,12.5,ok
'inst 2',1,'glucose 3',?,timeout
% trailing comment
"""


def test_parse_basic_relation():
    rel = parse_arff(SAMPLE)
    assert rel.name == "ALGORITHM_RUNS"
    assert rel.names == ["instance_id", "repetition", "algorithm", "runtime", "runstatus"]
    assert rel.attributes[4].values == ("ok", "timeout", "memout")
    assert rel.rows[0] == ["inst1", 1.0, "minisat", 12.5, "ok"]
    assert rel.rows[1] == ["inst 2", 1.0, "glucose 3", None, "timeout"]


def test_column_index_is_case_insensitive():
    rel = parse_arff(SAMPLE)
    assert rel.column_index("RUNTIME") == 3
    with pytest.raises(KeyError):
        rel.column_index("nope")


def test_crlf_line_endings():
    rel = parse_arff(SAMPLE.replace("\n", "\r\n"))
    assert rel.rows[0][3] == 12.5


@pytest.mark.parametrize(
    "text",
    [
        "@RELATION r\n@ATTRIBUTE a NUMERIC\n@DATA\n1,2\n",  # arity
        "@RELATION r\n@ATTRIBUTE a NUMERIC\n@DATA\nabc\n",  # not a number
        "@RELATION r\n@ATTRIBUTE a {x,y}\n@DATA\nz\n",  # outside nominal domain
        "@RELATION r\n@ATTRIBUTE a NUMERIC\n1\n",  # no @DATA
        "@ATTRIBUTE a NUMERIC\n@DATA\n1\n",  # no @RELATION
        "@RELATION r\n@ATTRIBUTE a RELATIONAL\n@DATA\n",  # unsupported type
        "@RELATION r\n@ATTRIBUTE a NUMERIC\n@DATA\n{0 1}\n",  # sparse
    ],
)
def test_malformed_inputs_raise(text):
    with pytest.raises(MalformedArff):
        parse_arff(text)


def test_error_carries_line_number():
    with pytest.raises(MalformedArff) as info:
        parse_arff("@RELATION r\n@ATTRIBUTE a NUMERIC\n@DATA\n1\nxyz\n")
    assert info.value.line == 5


def test_quoted_question_mark_is_a_value():
    rel = parse_arff("@RELATION r\n@ATTRIBUTE s STRING\n@DATA\n'?'\n?\n")
    assert rel.rows == [["?"], [None]]


_names = st.text(alphabet=st.characters(blacklist_categories=("Cs",), blacklist_characters="\n\r"), min_size=1, max_size=8)
_floats = st.floats(allow_nan=False, allow_infinity=False)


@given(
    strings=st.lists(st.one_of(st.none(), _names), min_size=1, max_size=6),
    numbers=st.lists(st.one_of(st.none(), _floats), min_size=1, max_size=6),
)
def test_dump_parse_round_trip(strings, numbers):
    n = min(len(strings), len(numbers))
    rel = Relation(
        "round trip",
        [Attribute("s", STRING), Attribute("x", NUMERIC), Attribute("k", NOMINAL, ("a b", "c"))],
        [[strings[i], numbers[i], ("a b", "c", None)[i % 3]] for i in range(n)],
    )
    back = parse_arff(dump_arff(rel))
    assert back.name == rel.name
    assert back.attributes == rel.attributes
    for got, want in zip(back.rows, rel.rows):
        assert got[0] == want[0]
        assert got[2] == want[2]
        if want[1] is None:
            assert got[1] is None
        else:
            assert got[1] == want[1] or (math.isclose(got[1], want[1]) and got[1] == 0)
