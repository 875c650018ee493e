import time

import pytest

from ruleforge.core import Triple
from ruleforge.ruledsl import (
    BAD_OUTPUT,
    BUILTINS,
    FIND_MISS,
    INDEX_OUT_OF_RANGE,
    MAX_OUTPUT_CHARS,
    MAX_STEPS,
    NUMBER_PARSE,
    REDECLARED_VARIABLE,
    TYPE_MISMATCH,
    UNDEFINED_VARIABLE,
    WALL_CLOCK,
    ExecOutcome,
    Limits,
    execute,
    parse,
    render_number,
    run_source,
)

T = Triple


def run(source, triples=None, limits=None):
    return run_source(source, triples if triples is not None else [T("A", "p", "B")], limits)


def ok(source, triples=None, limits=None):
    outcome = run(source, triples, limits)
    assert outcome.ok, outcome.describe()
    return outcome.text


class TestBasics:
    def test_default_rule_shape(self):
        src = 'output = triples[0].subj + " " + triples[0].pred + " " + triples[0].obj;'
        assert ok(src) == "A p B"

    def test_output_must_be_set(self):
        outcome = run("let x = 1;")
        assert outcome.status == "runtime-error" and outcome.kind == BAD_OUTPUT

    def test_output_must_be_text(self):
        outcome = run("output = 42;")
        assert outcome.kind == BAD_OUTPUT

    def test_undefined_variable_in_loop(self):
        outcome = run("for t in triples { output = output; }")
        assert outcome.kind == UNDEFINED_VARIABLE

    def test_assign_requires_existing_name(self):
        assert run("x = 1;").kind == UNDEFINED_VARIABLE
        assert ok('output = "ok";') == "ok"  # output is implicitly introduced

    def test_re_let_is_an_error(self):
        assert run('let x = 1; let x = 2; output = "no";').kind == REDECLARED_VARIABLE

    def test_loop_variable_implicitly_introduced(self):
        src = 'output = ""; for t in triples { output += t.pred; }'
        assert ok(src, [T("a", "p", "b"), T("c", "q", "d")]) == "pq"

    def test_aug_assign_needs_existing(self):
        assert run('output += "x";').kind == UNDEFINED_VARIABLE


class TestValuesAndOperators:
    def test_concat_stringifies_numbers(self):
        assert ok('output = "n=" + 3;') == "n=3"
        assert ok('output = "n=" + 3.5;') == "n=3.5"
        assert ok('output = "b=" + true;') == "b=true"

    def test_number_addition(self):
        assert ok("output = str(1 + 2);") == "3"

    def test_plus_on_bools_is_error(self):
        assert run("output = str(true + false);").kind == TYPE_MISMATCH

    def test_division_follows_binary64(self):
        assert ok("output = str(1 / 0);") == "inf"
        assert ok("output = str(-1 / 0);") == "-inf"
        assert ok("output = str(0 / 0);") == "nan"
        assert ok("output = str(7 / 2);") == "3.5"

    def test_text_comparison_lexicographic(self):
        assert ok('if "abc" < "abd" { output = "y"; } else { output = "n"; }') == "y"

    def test_mixed_comparison_is_error(self):
        assert run('output = str(1 < "a");').kind == TYPE_MISMATCH

    def test_equality_across_types_is_false(self):
        assert ok('if 1 == "1" { output = "eq"; } else { output = "ne"; }') == "ne"
        assert ok('if 1 == true { output = "eq"; } else { output = "ne"; }') == "ne"

    def test_structural_equality(self):
        assert ok('if [1, "a"] == [1, "a"] { output = "eq"; } else { output = "ne"; }') == "eq"
        assert ok('if {"k": 1} == {"k": 2} { output = "eq"; } else { output = "ne"; }') == "ne"

    def test_short_circuit(self):
        # the right operand would fail (find miss) if evaluated
        src = 'if true or has(triples, "missing") { output = "y"; } else { output = "n"; }'
        assert ok(src) == "y"
        assert ok('if false and (1 / 0) == 0 { output = "y"; } else { output = "n"; }') == "n"

    def test_condition_must_be_bool(self):
        assert run('if 1 { output = "x"; }').kind == TYPE_MISMATCH

    def test_for_iterates_lists_only(self):
        assert run('for c in "abc" { output = c; }').kind == TYPE_MISMATCH

    def test_negative_index(self):
        assert ok("output = triples[-1].obj;", [T("a", "p", "b"), T("c", "q", "d")]) == "d"

    def test_index_out_of_range(self):
        assert run("output = triples[3].obj;").kind == INDEX_OUT_OF_RANGE

    def test_text_indexing(self):
        assert ok('output = "hello"[1];') == "e"

    def test_map_lookup_and_miss(self):
        assert ok('let m = {"1": "Jan"}; output = m["1"];') == "Jan"
        assert run('let m = {"1": "Jan"}; output = m["2"];').kind == INDEX_OUT_OF_RANGE

    def test_unary_minus(self):
        assert ok("output = str(-(2 + 3));") == "-5"


class TestNumberRendering:
    @pytest.mark.parametrize(
        "value,expected",
        [(3.0, "3"), (-0.0, "0"), (3.5, "3.5"), (0.1, "0.1"), (1e20, "100000000000000000000"), (0.00001, "1e-05")],
    )
    def test_render(self, value, expected):
        assert render_number(value) == expected

    def test_integral_print_in_interpolation(self):
        assert ok('output = "{num(triples[0].obj)}";', [T("x", "count", "14.0")]) == "14"

    def test_fixed_point_rounds_half_to_even(self):
        assert ok('output = "{12.5:.0f} {13.5:.0f}";') == "12 14"

    def test_fixed_point_formats(self):
        assert ok('output = "{num(triples[0].obj):.2f}";', [T("x", "len", "3.14159")]) == "3.14"

    def test_format_needs_number(self):
        assert run('output = "{triples[0].subj:.1f}";').kind == TYPE_MISMATCH


class TestBuiltins:
    def test_text_functions(self):
        assert ok('output = lower("ABC") + upper("d") + capitalize("ef GH") + title("ij kl") + trim("  x ");') == (
            "abc" + "D" + "Ef gh" + "Ij Kl" + "x"
        )

    def test_replace_split_join_len(self):
        assert ok('output = replace("a-b-c", "-", "+");') == "a+b+c"
        assert ok('output = join(split("a,b,c", ","), " and ");') == "a and b and c"
        assert ok('output = str(len("abcd")) + str(len(triples)) + str(len({"a": 1}));') == "411"

    def test_num_and_failure(self):
        assert ok('output = str(num(" 12.5 "));') == "12.5"
        assert run('output = str(num("twelve"));').kind == NUMBER_PARSE

    def test_predicate_checks_normalize(self):
        triples = [T("M", "birthPlace", "Vienna"), T("M", "birth_year", "1756")]
        assert ok('output = find(triples, "birth place").obj;', triples) == "Vienna"
        assert ok('output = str(len(filter_pred(triples, "Birth Year")));', triples) == "1"
        assert ok('if has(triples, "birth year") { output = "y"; } else { output = "n"; }', triples) == "y"

    def test_find_miss(self):
        assert run('output = find(triples, "nope").obj;').kind == FIND_MISS

    def test_contains_startswith_endswith(self):
        assert ok('if contains("abc", "b") and startswith("abc", "a") and endswith("abc", "c") '
                  '{ output = "y"; } else { output = "n"; }') == "y"

    def test_join_stringifies(self):
        assert ok('output = join([1, "a", true], "|");') == "1|a|true"

    def test_sandbox_has_no_io_builtins(self):
        assert set(BUILTINS) == {
            "lower", "upper", "capitalize", "title", "trim", "replace", "split", "join",
            "len", "str", "num", "contains", "startswith", "endswith", "find", "filter_pred", "has",
        }


LOOPY = """\
let s = "aaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaa";
let parts = split(s, "a");
let i = 0;
for a in parts { for b in parts { for c in parts { i = i + 1; } } }
output = "done";
"""


class TestLimits:
    def test_step_limit(self):
        outcome = run(LOOPY)
        assert outcome.status == "limit-exceeded" and outcome.kind == MAX_STEPS

    def test_step_budget_allows_small_programs(self):
        assert ok(LOOPY, limits=Limits(max_steps=5_000_000)) == "done"

    def test_output_chars_limit_on_growth(self):
        src = 'let x = "abcdefgh"; let i = 0; for a in split("aaaaaaaaaaaaaaaaaaaa", "a") { x = x + x; } output = x;'
        outcome = run(src)
        assert outcome.kind == MAX_OUTPUT_CHARS

    def test_final_output_capped(self):
        outcome = run('output = "abcdef";', limits=Limits(max_output_chars=3))
        assert outcome.kind == MAX_OUTPUT_CHARS

    def test_wall_clock(self):
        outcome = run(LOOPY, limits=Limits(max_steps=100_000_000, wall_clock_s=1e-9))
        assert outcome.status == "limit-exceeded" and outcome.kind == WALL_CLOCK

    def test_limits_must_be_positive(self):
        with pytest.raises(ValueError):
            Limits(max_steps=0)


class TestDeterminismAndTotality:
    @pytest.mark.parametrize(
        "source",
        [
            'output = "hi";',
            "output = triples[9].obj;",
            LOOPY,
            'output = find(triples, "zzz").subj;',
            "let x = 1; let x = 2;",
        ],
    )
    def test_repeat_runs_identical(self, source):
        first = run(source)
        second = run(source)
        assert (first.status, first.kind, first.text, first.message) == (
            second.status,
            second.kind,
            second.text,
            second.message,
        )

    def test_adversarial_bodies_always_return_an_outcome(self):
        bodies = [
            LOOPY,
            'let x = "y"; for a in split("aaaaaaaaaa", "a") { x = x + x + x; } output = x;',
            "output = 1 / 0;",
            'output = "{1 / 0}";',
            "let m = {}; output = m[triples[0].subj];",
        ]
        for body in bodies:
            started = time.monotonic()
            outcome = run(body)
            assert isinstance(outcome, ExecOutcome)
            assert time.monotonic() - started < 5.0

    def test_random_token_soup_only_raises_parse_errors(self):
        import random

        from ruleforge.ruledsl import ParseError, parse

        rng = random.Random(7)
        tokens = [
            "let", "if", "else", "for", "in", "output", "=", "+=", ";", "{", "}", "(", ")",
            "[", "]", '"a"', '"{x}"', '"{x:.2f}"', "1", "2.5", "true", "not", "+", "-", "*",
            "/", "==", "<", "and", "or", ",", ":", ".subj", "triples", "find", '"{', '}}"', "\\", '"',
        ]
        for _ in range(2000):
            soup = " ".join(rng.choice(tokens) for _ in range(rng.randint(1, 25)))
            try:
                parse(soup)
            except ParseError:
                pass


AIRPORT_TRIPLES = [
    T("Adolfo Airport", "city served", "Madrid"),
    T("Adolfo Airport", "operating organisation", "ENAIRE"),
    T("Adolfo Airport", "elevation above the sea level", "12.0"),
    T("Adolfo Airport", "runway name", "14L/32R"),
    T("Adolfo Airport", "runway length", "3500.0"),
]

AIRPORT_RULE = (
    'let subj = triples[0].subj;\n'
    'output = "{triples[1].obj} is the {triples[1].pred} of {subj} located at '
    '{num(triples[2].obj):.0f} metres above sea level in {triples[0].obj}. '
    'The airport runway, named {triples[3].obj} has a length of {num(triples[4].obj):.0f}.";'
)


def test_airport_rule_formats_numbers():
    program = parse(AIRPORT_RULE)
    outcome = execute(program, AIRPORT_TRIPLES)
    assert outcome.ok
    assert outcome.text == (
        "ENAIRE is the operating organisation of Adolfo Airport located at 12 metres "
        "above sea level in Madrid. The airport runway, named 14L/32R has a length of 3500."
    )


def test_execution_is_fast_enough():
    program = parse(AIRPORT_RULE)
    execute(program, AIRPORT_TRIPLES)  # warm up
    n = 200
    started = time.perf_counter()
    for _ in range(n):
        execute(program, AIRPORT_TRIPLES)
    per_call = (time.perf_counter() - started) / n
    assert per_call < 1e-3, f"{per_call * 1e6:.0f} us per execution"
