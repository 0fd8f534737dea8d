import pytest

from acc_codesign.model import (Category, Duration, ModelError, TaskSet, TaskSpec, errors_of,
                                extract_task_set, instantiate, validate)
from acc_codesign.parser import parse, parse_file

from conftest import CORPUS, MODELS

TWO_THREADS = """
processor CPU end CPU;
thread Worker end Worker;
system Top end Top;
system implementation Top.impl
subcomponents
  cpu : processor CPU;
  a : thread Worker;
  b : thread Worker;
properties
  Period => 40 ms;
  Compute_Execution_Time => 4 ms .. 6 ms;
  Actual_Processor_Binding => (reference (cpu));
end Top.impl;
"""


def tree_of(src, root="Top.impl"):
    return instantiate(parse(src), root)


def test_two_thread_tree():
    tree = tree_of(TWO_THREADS)
    threads = [i for i in tree.walk() if i.category is Category.THREAD]
    assert [t.name for t in threads] == ["a", "b"]
    assert max(len(i.path) for i in tree.walk()) == 2


def test_unresolved_classifier():
    src = "system implementation Top.impl subcomponents x : thread Foo; end Top.impl;"
    with pytest.raises(ModelError, match="unresolved classifier Foo"):
        tree_of("system Top end Top;" + src)


def test_cyclic_containment():
    src = """
    system A end A;
    system implementation A.i subcomponents inner : system A.i; end A.i;
    """
    with pytest.raises(ModelError, match="cycl"):
        tree_of(src, "A.i")


def test_unknown_root():
    with pytest.raises(ModelError):
        tree_of(TWO_THREADS, "Nope.impl")


def test_reference_dual_counts():
    tree = instantiate(parse_file(MODELS / "acc_dual.adl"), "ACC_RD.impl")
    cats = [i.category for i in tree.walk()]
    assert cats.count(Category.THREAD) == 10
    assert cats.count(Category.PROCESSOR) == 2


def test_extract_uses_range_upper_bound():
    ts = extract_task_set(tree_of(TWO_THREADS))
    assert [(t.name, t.period, t.exec_time, t.deadline) for t in ts] == [
        ("a", 40_000, 6_000, 40_000), ("b", 40_000, 6_000, 40_000)]
    assert ts.processors == ("cpu",)


def test_reference_dual_binding_split(dual_ts):
    assert len(dual_ts) == 10
    assert len(dual_ts.on("ECU1")) == 3 and len(dual_ts.on("ECU2")) == 7
    assert {t.exec_time for t in dual_ts.on("ECU1")} == {6000}
    assert {t.exec_time for t in dual_ts.on("ECU2")} == {4000}
    assert dual_ts.protocol == "rate_monotonic"


def test_reference_shared_data(dual_ts):
    track = dual_ts.task("track_filter")
    assert "ffrp.track_buf" in track.shared_data
    assert dual_ts.task("gap_ctrl").shared_data  # reads a buffer written on ECU1


def test_missing_period():
    src = """
    thread T end T;
    system S end S;
    system implementation S.i
    subcomponents t1 : thread T;
    properties Compute_Execution_Time => 1 ms applies to t1;
    end S.i;
    """
    with pytest.raises(ModelError, match="thread S.t1: missing Period"):
        extract_task_set(tree_of(src, "S.i"))


def test_missing_period_names_full_path():
    src = """
    thread T end T;
    process P end P;
    process implementation P.i subcomponents t1 : thread T; end P.i;
    system acc end acc;
    system implementation acc.i
    subcomponents ffrp : process P.i;
    properties Compute_Execution_Time => 1 ms applies to ffrp.t1;
    end acc.i;
    """
    with pytest.raises(ModelError, match="thread acc.ffrp.t1: missing Period"):
        extract_task_set(tree_of(src, "acc.i"))


def test_applies_to_overrides_inherited():
    src = TWO_THREADS.replace("end Top.impl;", "  Period => 80 ms applies to b;\nend Top.impl;")
    ts = extract_task_set(tree_of(src))
    assert ts.task("a").period == 40_000
    assert ts.task("b").period == 80_000


def test_applies_to_beats_type_level_value():
    src = """
    processor CPU end CPU;
    thread Worker end Worker;
    thread implementation Worker.i properties Period => 10 ms; end Worker.i;
    system Top end Top;
    system implementation Top.impl
    subcomponents
      cpu : processor CPU;
      a : thread Worker.i;
    properties
      Compute_Execution_Time => 1 ms;
      Period => 25 ms applies to a;
    end Top.impl;
    """
    tree = tree_of(src)
    assert tree.find(("Top", "a")).properties["Period"] == Duration(25_000)


def test_own_impl_value_beats_inherited():
    src = """
    thread Worker end Worker;
    thread implementation Worker.i properties Period => 10 ms; end Worker.i;
    system Top end Top;
    system implementation Top.impl
    subcomponents a : thread Worker.i;
    properties Period => 99 ms;
    end Top.impl;
    """
    assert tree_of(src).find(("Top", "a")).properties["Period"] == Duration(10_000)


def test_single_model_period_override(single_ts):
    assert {t.period for t in single_ts} == {80_000}
    assert sum(t.exec_time for t in single_ts) == 46_000


def test_unrecognised_property_is_warning():
    src = TWO_THREADS.replace("end Top.impl;", "  Colour => Blue;\nend Top.impl;")
    diags = validate(tree_of(src))
    assert not errors_of(diags)
    assert any("Colour" in d.message for d in diags)


def test_validate_reference_model_clean():
    tree = instantiate(parse_file(MODELS / "acc_dual.adl"), "ACC_RD.impl")
    assert validate(tree) == []


def test_validate_overload_warning():
    src = TWO_THREADS.replace("4 ms .. 6 ms", "46 ms").replace("  b : thread Worker;\n", "")
    src = src.replace("cpu :", "ECU0 :").replace("(cpu)", "(ECU0)")
    diags = validate(tree_of(src))
    assert any(d.severity == "warning" and d.message == "utilization > 1 on ECU0" for d in diags)
    assert any("exceeds period" in d.message for d in diags)


def test_validate_binding_to_device_is_error():
    src = TWO_THREADS.replace("processor CPU end CPU;", "device CPU end CPU;") \
        .replace("cpu : processor CPU", "cpu : device CPU")
    errs = errors_of(validate(tree_of(src)))
    assert errs and "not a processor" in errs[0].message


def test_validate_unbound_and_unconnected():
    src = """
    thread T features i : in data port; end T;
    system S end S;
    system implementation S.i
    subcomponents t : thread T;
    properties Period => 10 ms; Compute_Execution_Time => 1 ms;
    end S.i;
    """
    msgs = [d.message for d in validate(tree_of(src, "S.i"))]
    assert any("not bound" in m for m in msgs)
    assert any("not connected" in m for m in msgs)


def test_instantiation_deterministic():
    src = (MODELS / "acc_dual.adl").read_text()
    a = instantiate(parse(src), "ACC_RD.impl")
    b = instantiate(parse(src), "ACC_RD.impl")
    assert [(i.path, i.properties) for i in a.walk()] == [(i.path, i.properties) for i in b.walk()]
    assert extract_task_set(a) == extract_task_set(b)


@pytest.mark.parametrize("path", sorted(CORPUS.glob("*.adl"))[:20], ids=lambda p: p.name)
def test_task_count_matches_thread_declarations(path):
    m = parse_file(path)
    tree = instantiate(m, "Top.impl")
    declared = sum(1 for s in m.impls()["Proc.impl"].subcomponents
                   if s.category is Category.THREAD)
    assert len(extract_task_set(tree)) == declared


def test_taskspec_invariants():
    with pytest.raises(ValueError):
        TaskSpec("x", 0, 1)
    with pytest.raises(ValueError):
        TaskSpec("x", 10, 0)
    assert TaskSpec("x", 10, 20).deadline == 10  # overload is legal


def test_rm_ignores_explicit_priority():
    ts = TaskSet([TaskSpec("slow", 20, 1, priority=99, processor="P"),
                  TaskSpec("fast", 10, 1, priority=1, processor="P")], ("P",))
    assert ts.priority_order() == [1, 0]
    fp = TaskSet(ts.tasks, ("P",), "fixed_priority")
    assert fp.priority_order() == [0, 1]


def test_unknown_processor_rejected():
    with pytest.raises(ValueError):
        TaskSet([TaskSpec("a", 10, 1, processor="Q")], ("P",))
