"""Architecture model: declarations, instance tree and task-set extraction.

Declarations (``ComponentType``/``ComponentImpl``) are what the parser
produces.  ``instantiate`` flattens them into an ``Instance`` tree with
resolved properties, and ``extract_task_set`` turns the thread instances of
that tree into a ``TaskSet`` for the scheduling analyses.

All durations are integer microseconds.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Optional, Union


class Category(str, enum.Enum):
    SYSTEM = "system"
    PROCESS = "process"
    THREAD = "thread"
    PROCESSOR = "processor"
    DEVICE = "device"
    BUS = "bus"
    MEMORY = "memory"
    DATA = "data"


CATEGORIES = frozenset(c.value for c in Category)

RECOGNIZED_PROPERTIES = (
    "Period",
    "Compute_Execution_Time",
    "Deadline",
    "Priority",
    "Scheduling_Protocol",
    "Actual_Processor_Binding",
)

# Processor protocol values mapped onto TaskSet.protocol.
PROTOCOL_NAMES = {
    "rate_monotonic": "rate_monotonic",
    "rate_monotonic_protocol": "rate_monotonic",
    "rm": "rate_monotonic",
    "fixed_priority": "fixed_priority",
    "fixed_priority_protocol": "fixed_priority",
    "posix_1003_highest_priority_first_protocol": "fixed_priority",
    "highest_priority_first": "fixed_priority",
}


# -- property values ---------------------------------------------------------

@dataclass(frozen=True)
class Duration:
    us: int

    @property
    def ms(self) -> float:
        return self.us / 1000.0


@dataclass(frozen=True)
class DurationRange:
    low: Duration
    high: Duration


@dataclass(frozen=True)
class Reference:
    path: tuple[str, ...]


PropertyValue = Union[Duration, DurationRange, int, str, Reference]


# -- declarations ------------------------------------------------------------

@dataclass(frozen=True)
class Port:
    name: str
    direction: str  # "in" | "out" | "in_out"
    kind: str  # "data" | "event"
    data_ref: Optional[str] = None
    loc: Optional[tuple[int, int]] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class ComponentType:
    category: Category
    name: str
    features: tuple[Port, ...] = ()
    loc: Optional[tuple[int, int]] = field(default=None, compare=False, repr=False)

    @property
    def qualified_name(self) -> str:
        return self.name


@dataclass(frozen=True)
class Subcomponent:
    name: str
    category: Category
    classifier: str
    loc: Optional[tuple[int, int]] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Connection:
    name: str
    source: tuple[str, ...]
    dest: tuple[str, ...]
    loc: Optional[tuple[int, int]] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class PropertyAssoc:
    name: str
    value: PropertyValue
    applies_to: Optional[tuple[str, ...]] = None
    loc: Optional[tuple[int, int]] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class ComponentImpl:
    category: Category
    type_name: str
    impl_name: str
    subcomponents: tuple[Subcomponent, ...] = ()
    connections: tuple[Connection, ...] = ()
    properties: tuple[PropertyAssoc, ...] = ()
    loc: Optional[tuple[int, int]] = field(default=None, compare=False, repr=False)

    @property
    def qualified_name(self) -> str:
        return f"{self.type_name}.{self.impl_name}"


Declaration = Union[ComponentType, ComponentImpl]


@dataclass(frozen=True)
class ArchModel:
    declarations: tuple[Declaration, ...] = ()

    def types(self) -> dict[str, ComponentType]:
        return {d.name: d for d in self.declarations if isinstance(d, ComponentType)}

    def impls(self) -> dict[str, ComponentImpl]:
        return {d.qualified_name: d for d in self.declarations if isinstance(d, ComponentImpl)}


# -- diagnostics -------------------------------------------------------------

@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    message: str
    location: Union[tuple[int, int], str, None] = None

    def __str__(self) -> str:
        if isinstance(self.location, tuple):
            where = f"{self.location[0]}:{self.location[1]}: "
        elif self.location:
            where = f"{self.location}: "
        else:
            where = ""
        return f"{where}{self.severity}: {self.message}"


class ModelError(Exception):
    """Raised when a model cannot be processed further; carries diagnostics."""

    def __init__(self, diagnostics):
        if isinstance(diagnostics, Diagnostic):
            diagnostics = [diagnostics]
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(d.message for d in self.diagnostics))


def errors_of(diagnostics):
    return [d for d in diagnostics if d.severity == "error"]


# -- instance tree -----------------------------------------------------------

@dataclass
class Instance:
    name: str
    category: Category
    path: tuple[str, ...]
    classifier: str
    ports: tuple[Port, ...] = ()
    properties: dict = field(default_factory=dict)
    children: list["Instance"] = field(default_factory=list)
    # (name, source instance path, dest instance path); endpoint paths are
    # absolute (root-relative) and may end in a port name.
    connections: list[tuple[str, tuple[str, ...], tuple[str, ...]]] = field(default_factory=list)

    @property
    def dotted(self) -> str:
        return ".".join(self.path)

    def walk(self):
        yield self
        for child in self.children:
            yield from child.walk()


@dataclass
class InstanceTree:
    root: Instance
    warnings: list[Diagnostic] = field(default_factory=list)

    def walk(self):
        return self.root.walk()

    def find(self, path: tuple[str, ...]) -> Optional[Instance]:
        if not path or path[0] != self.root.name:
            return None
        node = self.root
        for part in path[1:]:
            for child in node.children:
                if child.name == part:
                    node = child
                    break
            else:
                return None
        return node

    def all_connections(self):
        for inst in self.walk():
            yield from inst.connections

    def __len__(self):
        return sum(1 for _ in self.walk())


def instantiate(model: ArchModel, root: str) -> InstanceTree:
    """Flatten ``model`` starting at implementation ``root`` (``Type.impl``).

    Properties are inherited downward, nearest enclosing association first.
    A contained association (``applies to``) beats both the classifier's own
    value and inherited ones; between two contained associations targeting
    the same instance, the one declared higher up the hierarchy wins.

    Raises ModelError on unresolved classifiers, containment cycles or
    unresolved connection endpoints.
    """
    types = model.types()
    impls = model.impls()
    diags: list[Diagnostic] = []

    root_impl = impls.get(root)
    if root_impl is None:
        raise ModelError(Diagnostic("error", f"unresolved classifier {root}"))

    for impl in impls.values():
        for assoc in impl.properties:
            if assoc.name not in RECOGNIZED_PROPERTIES:
                diags.append(Diagnostic("warning", f"unrecognized property {assoc.name}", assoc.loc))

    contained: dict[tuple[str, ...], dict[str, PropertyValue]] = {}

    def resolve_value(value, owner_path):
        if isinstance(value, Reference):
            return owner_path + value.path
        return value

    def build(name, category, classifier, path, inherited, stack, loc):
        type_name, _, impl_part = classifier.partition(".")
        ctype = types.get(type_name)
        impl = impls.get(classifier) if impl_part else None
        if ctype is None and impl is None:
            diags.append(Diagnostic("error", f"unresolved classifier {classifier}", loc))
            return None
        if impl_part and impl is None:
            diags.append(Diagnostic("error", f"unresolved classifier {classifier}", loc))
            return None
        decl_category = impl.category if impl else ctype.category
        if category is not None and decl_category != category:
            diags.append(Diagnostic(
                "error",
                f"subcomponent {name} declared as {category.value} but "
                f"classifier {classifier} is a {decl_category.value}",
                loc))
        if impl is not None and ctype is not None and ctype.category != impl.category:
            diags.append(Diagnostic(
                "error", f"implementation {classifier} category differs from its type", impl.loc))
        if classifier in stack:
            diags.append(Diagnostic(
                "error", f"cyclic containment through {classifier}", loc))
            return None

        props = dict(inherited)
        if impl is not None:
            for assoc in impl.properties:
                if assoc.applies_to is None:
                    props[assoc.name] = resolve_value(assoc.value, path)
        props.update(contained.get(path, {}))

        inst = Instance(
            name=name,
            category=decl_category,
            path=path,
            classifier=classifier,
            ports=ctype.features if ctype else (),
            properties=props,
        )
        if impl is None:
            return inst

        for assoc in impl.properties:
            if assoc.applies_to is not None:
                target = path + assoc.applies_to
                slot = contained.setdefault(target, {})
                if assoc.name not in slot:
                    slot[assoc.name] = resolve_value(assoc.value, path)

        seen = set()
        for sub in impl.subcomponents:
            if sub.name in seen:
                diags.append(Diagnostic("error", f"duplicate subcomponent {sub.name}", sub.loc))
                continue
            seen.add(sub.name)
            child = build(sub.name, sub.category, sub.classifier, path + (sub.name,),
                          props, stack | {classifier}, sub.loc)
            if child is not None:
                inst.children.append(child)

        for conn in impl.connections:
            ends = []
            for end in (conn.source, conn.dest):
                if not _endpoint_exists(inst, end):
                    diags.append(Diagnostic(
                        "error",
                        f"connection {conn.name}: unresolved endpoint {'.'.join(end)}",
                        conn.loc))
                ends.append(path + end)
            inst.connections.append((conn.name, ends[0], ends[1]))
        return inst

    root_name = root_impl.type_name
    tree_root = build(root_name, None, root, (root_name,), {}, frozenset(), root_impl.loc)
    # contained associations whose target never materialised
    if tree_root is not None:
        present = {inst.path for inst in tree_root.walk()}
        for target in contained:
            if target not in present:
                diags.append(Diagnostic(
                    "error", f"property applies to unknown instance {'.'.join(target)}"))
    if errors_of(diags):
        raise ModelError(errors_of(diags))
    return InstanceTree(tree_root, [d for d in diags if d.severity == "warning"])


def _endpoint_exists(inst: Instance, end: tuple[str, ...]) -> bool:
    if len(end) == 1:
        if any(p.name == end[0] for p in inst.ports):
            return True
        return any(c.name == end[0] for c in inst.children)
    node = inst
    for i, part in enumerate(end):
        child = next((c for c in node.children if c.name == part), None)
        if child is None:
            # last element may be a port of the current node
            return i == len(end) - 1 and any(p.name == part for p in node.ports)
        node = child
    return True


# -- task sets ---------------------------------------------------------------

@dataclass(frozen=True)
class TaskSpec:
    """Periodic task; times in microseconds, priority: larger is more urgent."""

    name: str
    period: int
    exec_time: int
    deadline: Optional[int] = None
    priority: Optional[int] = None
    processor: Optional[str] = None
    shared_data: tuple[str, ...] = ()
    path: Optional[str] = None

    def __post_init__(self):
        if self.period <= 0:
            raise ValueError(f"task {self.name}: period must be positive")
        if self.exec_time <= 0:
            raise ValueError(f"task {self.name}: execution time must be positive")
        if self.deadline is None:
            object.__setattr__(self, "deadline", self.period)
        elif self.deadline <= 0:
            raise ValueError(f"task {self.name}: deadline must be positive")

    @property
    def utilization(self) -> float:
        return self.exec_time / self.period


@dataclass(frozen=True)
class TaskSet:
    tasks: tuple[TaskSpec, ...]
    processors: tuple[str, ...]
    protocol: str = "rate_monotonic"

    def __post_init__(self):
        object.__setattr__(self, "tasks", tuple(self.tasks))
        object.__setattr__(self, "processors", tuple(self.processors))
        if self.protocol not in ("rate_monotonic", "fixed_priority"):
            raise ValueError(f"unknown protocol {self.protocol!r}")
        for t in self.tasks:
            if t.processor is not None and t.processor not in self.processors:
                raise ValueError(f"task {t.name} bound to unknown processor {t.processor}")

    def __iter__(self):
        return iter(self.tasks)

    def __len__(self):
        return len(self.tasks)

    def task(self, name: str) -> TaskSpec:
        for t in self.tasks:
            if t.name == name:
                return t
        raise KeyError(name)

    def on(self, processor: str) -> list[TaskSpec]:
        return [t for t in self.tasks if t.processor == processor]

    @property
    def all_bound(self) -> bool:
        return all(t.processor is not None for t in self.tasks)

    def priority_order(self) -> list[int]:
        """Task indices from most to least urgent; ties by declaration order."""
        idx = range(len(self.tasks))
        if self.protocol == "rate_monotonic":
            return sorted(idx, key=lambda i: (self.tasks[i].period, i))
        missing = [t.name for t in self.tasks if t.priority is None]
        if missing:
            raise ValueError(f"fixed_priority protocol but no Priority for {', '.join(missing)}")
        return sorted(idx, key=lambda i: (-self.tasks[i].priority, i))

    def with_tasks(self, tasks) -> "TaskSet":
        return replace(self, tasks=tuple(tasks))


def _dotted(path, root_len=1):
    return ".".join(path[root_len:]) or path[-1]


def extract_task_set(tree: InstanceTree) -> TaskSet:
    """One TaskSpec per thread instance, in declaration (pre-)order."""
    threads = [i for i in tree.walk() if i.category is Category.THREAD]
    procs = [i for i in tree.walk() if i.category is Category.PROCESSOR]
    data_paths = {i.path for i in tree.walk() if i.category is Category.DATA}

    leaf_counts: dict[str, int] = {}
    for t in threads:
        leaf_counts[t.name] = leaf_counts.get(t.name, 0) + 1

    access: dict[tuple[str, ...], set] = {t.path: set() for t in threads}
    thread_paths = set(access)
    for _, src, dst in tree.all_connections():
        for a, b in ((src, dst), (dst, src)):
            if b in data_paths:
                owner = a if a in thread_paths else a[:-1]
                if owner in thread_paths:
                    access[owner].add(b)

    diags = []
    protocols = set()
    for p in procs:
        proto = p.properties.get("Scheduling_Protocol")
        if proto is not None:
            key = str(proto).lower()
            if key not in PROTOCOL_NAMES:
                diags.append(Diagnostic("error", f"unsupported scheduling protocol {proto}", p.dotted))
            else:
                protocols.add(PROTOCOL_NAMES[key])
    if len(protocols) > 1:
        diags.append(Diagnostic("error", "processors declare different scheduling protocols"))

    tasks = []
    for t in threads:
        props = t.properties
        period = props.get("Period")
        cet = props.get("Compute_Execution_Time")
        for pname, val in (("Period", period), ("Compute_Execution_Time", cet)):
            if val is None:
                diags.append(Diagnostic("error", f"thread {t.dotted}: missing {pname}", t.dotted))
        if period is None or cet is None:
            continue
        if not isinstance(period, Duration):
            diags.append(Diagnostic("error", f"thread {t.dotted}: Period must be a duration", t.dotted))
            continue
        if isinstance(cet, DurationRange):
            c = cet.high.us
        elif isinstance(cet, Duration):
            c = cet.us
        else:
            diags.append(Diagnostic(
                "error", f"thread {t.dotted}: Compute_Execution_Time must be a duration", t.dotted))
            continue
        deadline = props.get("Deadline")
        prio = props.get("Priority")
        binding = props.get("Actual_Processor_Binding")
        proc = _dotted(binding) if isinstance(binding, tuple) else None
        if binding is not None and not isinstance(binding, tuple):
            diags.append(Diagnostic(
                "error", f"thread {t.dotted}: Actual_Processor_Binding must be a reference", t.dotted))
        try:
            tasks.append(TaskSpec(
                name=t.name if leaf_counts[t.name] == 1 else _dotted(t.path),
                period=period.us,
                exec_time=c,
                deadline=deadline.us if isinstance(deadline, Duration) else None,
                priority=prio if isinstance(prio, int) else None,
                processor=proc,
                shared_data=tuple(_dotted(d) for d in sorted(access[t.path])),
                path=t.dotted,
            ))
        except ValueError as exc:
            diags.append(Diagnostic("error", str(exc), t.dotted))
    if diags:
        raise ModelError(diags)
    proc_names = tuple(_dotted(p.path) for p in procs)
    for task in tasks:
        if task.processor is not None and task.processor not in proc_names:
            raise ModelError(Diagnostic(
                "error", f"thread {task.path}: bound to non-processor {task.processor}", task.path))
    return TaskSet(tuple(tasks), proc_names, protocols.pop() if protocols else "rate_monotonic")


def validate(tree: InstanceTree) -> list[Diagnostic]:
    """Consistency checks; the diagnostics are the result, nothing is raised."""
    out = list(tree.warnings)
    by_path = {i.path: i for i in tree.walk()}
    incoming = set()
    for _, src, dst in tree.all_connections():
        incoming.add(dst)

    load: dict[str, float] = {}
    for inst in tree.walk():
        if inst.category is not Category.THREAD:
            continue
        props = inst.properties
        period = props.get("Period")
        cet = props.get("Compute_Execution_Time")
        c = cet.high if isinstance(cet, DurationRange) else cet
        binding = props.get("Actual_Processor_Binding")
        if binding is None:
            out.append(Diagnostic("warning", f"thread {inst.dotted} is not bound to a processor",
                                  inst.dotted))
        elif isinstance(binding, tuple):
            target = by_path.get(binding)
            if target is None:
                out.append(Diagnostic("error", f"thread {inst.dotted}: binding target "
                                      f"{'.'.join(binding)} does not exist", inst.dotted))
            elif target.category is not Category.PROCESSOR:
                out.append(Diagnostic(
                    "error", f"thread {inst.dotted}: bound to {target.category.value} "
                    f"{target.dotted}, not a processor", inst.dotted))
            elif isinstance(period, Duration) and isinstance(c, Duration):
                key = _dotted(binding)
                load[key] = load.get(key, 0.0) + c.us / period.us
        if isinstance(period, Duration) and isinstance(c, Duration) and c.us > period.us:
            out.append(Diagnostic("warning", f"thread {inst.dotted}: execution time "
                                  f"exceeds period", inst.dotted))
        for port in inst.ports:
            if port.direction in ("in", "in_out") and inst.path + (port.name,) not in incoming:
                out.append(Diagnostic("warning", f"in port {inst.dotted}.{port.name} "
                                      "is not connected", inst.dotted))
    for proc, u in load.items():
        if u > 1.0:
            out.append(Diagnostic("warning", f"utilization > 1 on {proc}", proc))
    return out
