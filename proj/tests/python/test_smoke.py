import rulechain


FACTS = (
    "James is from Arizona. Lucas is from Arizona. "
    "James sues Lucas for negligence for $5,000."
)


def test_logic():
    canonical = rulechain.normalize_expression("A and (B or not C)")
    assert rulechain.normalize_expression(canonical) == canonical
    assert rulechain.expression_variables(canonical) == ["A", "B", "C"]
    assert rulechain.evaluate("A and B", {"A": True, "B": False}) is False
    assert rulechain.substitute("A or B", {"A": True, "B": False}) == "(true or false)"
    rows = rulechain.truth_table("A or B")
    assert len(rows) == 4
    assert all(value == (a["A"] or a["B"]) for a, value in rows)


def test_errors_map_to_python():
    try:
        rulechain.normalize_expression("A and")
    except ValueError:
        pass
    else:
        raise AssertionError("expected ValueError")


def test_trace_and_prompt():
    sample = {"rule": "Rule text.", "facts": FACTS, "issue": "Is there diversity jurisdiction?",
              "rule_family": "dj1"}
    prompt = rulechain.build_prompt("chain_of_logic", sample)
    assert prompt.rstrip().endswith("Answer:")
    result = rulechain.verify_trace("no structure here")
    assert result["verdict"]["error_class"] == "ParseFailure"


def test_dj_and_macro():
    v = rulechain.dj_oracle(FACTS)
    assert v["complete_diversity"] is False and v["answer"] is False
    samples = rulechain.generate_dj(2, 10, seed=4)
    assert len(samples) == 10
    assert sum(s["verdict"]["answer"] for s in samples) == 5
    assert round(rulechain.macro_average({"a": 0.78, "b": 0.886, "c": 0.944}) * 100, 1) == 87.0


def test_run_eval_offline_backend_skips():
    report = rulechain.run_eval({"backend": "offline", "tasks": ["dj:1:3:1"]})
    assert report["tasks"][0]["skipped"] == 3
