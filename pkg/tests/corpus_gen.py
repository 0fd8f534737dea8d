"""Seeded generator for the ``.adl`` round-trip corpus.

Run ``python tests/corpus_gen.py`` to rewrite ``tests/corpus``; the files are
committed so the corpus does not depend on this script staying unchanged.
Surface syntax varies (keyword case, comments, spacing, units) while every
model instantiates cleanly from its last system implementation.
"""
import random
import sys
from pathlib import Path

CORPUS_DIR = Path(__file__).parent / "corpus"
N_MODELS = 60
UNIT_SCALE = (("us", 1), ("ms", 1000), ("s", 1_000_000))


class Writer:
    def __init__(self, rng):
        self.rng = rng
        self.lines = []

    def kw(self, word):
        r = self.rng.random()
        if r < 0.15:
            return word.upper()
        if r < 0.3:
            return word.capitalize()
        return word

    def sp(self):
        return self.rng.choice((" ", " ", " ", "  ", "\t"))

    def line(self, *parts, indent=0):
        text = " " * indent + self.sp().join(parts)
        if self.rng.random() < 0.1:
            text += f"{self.sp()}-- {self.rng.choice(('note', 'todo: check', 'x := 1 @ #'))}"
        self.lines.append(text)
        if self.rng.random() < 0.05:
            self.lines.append("")

    def comment(self, text):
        self.lines.append(f"-- {text}")

    def text(self):
        return "\n".join(self.lines) + "\n"


def duration(rng, us):
    """Spell ``us`` microseconds in a random exact unit."""
    options = [(u, us // s) for u, s in UNIT_SCALE if us % s == 0]
    unit, v = rng.choice(options)
    return f"{v} {unit}"


def generate(seed: int) -> str:
    rng = random.Random(seed)
    w = Writer(rng)
    w.comment(f"generated model {seed}")
    n_proc = rng.randint(1, 3)
    n_thr = rng.randint(1, 6)
    n_data = rng.randint(0, 2)
    procs = [f"CPU{k}" for k in range(n_proc)]
    for p in procs:
        w.line(w.kw("processor"), p)
        w.line(w.kw("end"), p + ";")
    if rng.random() < 0.3:
        w.line(w.kw("bus"), "Link")
        w.line(w.kw("end"), "Link;")
    if n_data:
        w.line(w.kw("data"), "Blob")
        w.line(w.kw("end"), "Blob;")

    # thread types with one in and one out port each
    ttypes = []
    for k in range(rng.randint(1, 3)):
        name = f"Worker{k}"
        ttypes.append(name)
        w.line(w.kw("thread"), name)
        w.line(w.kw("features"))
        direction = rng.choice(("in", "in out"))
        kind = rng.choice(("data", "event"))
        ref = " Blob" if n_data and kind == "data" and rng.random() < 0.5 else ""
        w.line(f"inp{w.sp()}:", " ".join(w.kw(x) for x in direction.split()), w.kw(kind),
               w.kw("port") + ref + ";", indent=2)
        w.line(f"outp{w.sp()}:", w.kw("out"), w.kw("data"), w.kw("port") + ";", indent=2)
        w.line(w.kw("end"), name + ";")
        if rng.random() < 0.5:
            w.line(w.kw("thread"), w.kw("implementation"), f"{name}.basic")
            w.line(w.kw("properties"))
            w.line("Priority", "=>", f"{rng.randint(1, 20)};", indent=2)
            w.line(w.kw("end"), f"{name}.basic;")

    threads = [f"t{k}" for k in range(n_thr)]
    data = [f"d{k}" for k in range(n_data)]
    w.line(w.kw("process"), "Proc")
    w.line(w.kw("end"), "Proc;")
    w.line(w.kw("process"), w.kw("implementation"), "Proc.impl")
    w.line(w.kw("subcomponents"))
    for t in threads:
        w.line(f"{t}{w.sp()}:", w.kw("thread"), rng.choice(ttypes) + ";", indent=2)
    for d in data:
        w.line(f"{d}{w.sp()}:", w.kw("data"), "Blob;", indent=2)
    conns = []
    for k, t in enumerate(threads):
        if data and rng.random() < 0.6:
            d = rng.choice(data)
            conns.append((f"{t}.outp", d) if rng.random() < 0.5 else (d, f"{t}.inp"))
        elif k:
            conns.append((f"{threads[k - 1]}.outp", f"{t}.inp"))
    if conns:
        w.line(w.kw("connections"))
        for n, (src, dst) in enumerate(conns):
            w.line(f"c{n}{w.sp()}:", w.kw("port"), src, "->", dst + ";", indent=2)
    w.line(w.kw("properties"))
    base = rng.choice((10, 20, 40, 50, 100)) * 1000
    w.line("Period", "=>", duration(rng, base) + ";", indent=2)
    for t in threads:
        if rng.random() < 0.4:
            w.line("Period", "=>", duration(rng, base * rng.choice((1, 2, 4))), w.kw("applies"),
                   w.kw("to"), t + ";", indent=2)
        hi = rng.randint(1, 5) * 1000
        lo = rng.randint(1, hi // 1000) * 1000
        if rng.random() < 0.7:
            w.line("Compute_Execution_Time", "=>", duration(rng, lo), "..", duration(rng, hi),
                   w.kw("applies"), w.kw("to"), t + ";", indent=2)
        else:
            w.line("Compute_Execution_Time", "=>", duration(rng, hi), w.kw("applies"),
                   w.kw("to"), t + ";", indent=2)
        if rng.random() < 0.2:
            w.line("Deadline", "=>", duration(rng, base), w.kw("applies"), w.kw("to"),
                   t + ";", indent=2)
    w.line(w.kw("end"), "Proc.impl;")

    w.line(w.kw("system"), "Top")
    w.line(w.kw("end"), "Top;")
    w.line(w.kw("system"), w.kw("implementation"), "Top.impl")
    w.line(w.kw("subcomponents"))
    for p in procs:
        w.line(f"{p.lower()}{w.sp()}:", w.kw("processor"), p + ";", indent=2)
    w.line(f"app{w.sp()}:", w.kw("process"), "Proc.impl;", indent=2)
    w.line(w.kw("properties"))
    w.line("Scheduling_Protocol", "=>",
           rng.choice(("Rate_Monotonic", "RATE_MONOTONIC_PROTOCOL")) + ";", indent=2)
    for t in threads:
        if rng.random() < 0.85:
            target = rng.choice(procs).lower()
            w.line("Actual_Processor_Binding", "=>", f"({w.kw('reference')}{w.sp()}({target}))",
                   w.kw("applies"), w.kw("to"), f"app.{t};", indent=2)
    w.line(w.kw("end"), "Top.impl;")
    return w.text()


def main(argv=None):
    CORPUS_DIR.mkdir(exist_ok=True)
    for seed in range(N_MODELS):
        (CORPUS_DIR / f"gen_{seed:03d}.adl").write_text(generate(seed), encoding="utf-8")
    print(f"wrote {N_MODELS} models to {CORPUS_DIR}")


if __name__ == "__main__":
    sys.exit(main())
