"""Rule-generated benchmark of 96 process models.

A fixed base net is edited by six formation rules.  Each rule adds its own
transitions (and at most one place) at fixed sites.  Two rules may attach
to the same existing place, but no rule adds, removes or relabels a node
that another rule touches, so the edits commute.

A  long-term dependencies: four silent bypasses, each skipping a stretch
   of the main chain
B  loops: 1 adds seven silent back-arcs, 2 also adds two silent exits
   from inside loop bodies forward onto the main branch
C  OR construct: the first AND split may start both branches or either
   one alone
D  invisible tasks: five designated transitions lose their label
E  optional tasks: silent skips in parallel with t1, t9 and t23
F  duplicate tasks: a copy of t4 runs right after the XOR join

The sites were picked so that, in the learned space, D, F and the
presence of loops dominate, while A, C, E and the loop level stay small.
Silent transition ids sort as gap* < shortcut* < t* < tau_b* < tau_or*;
that order fixes the positional names used by the unique silent policy.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from itertools import product
from pathlib import Path

from .errors import IoError
from .pnml_io import Arc, PetriNet, Transition, validate, write_pnml

RULES = ("A", "B", "C", "D", "E", "F")
SOURCE, SINK = "source", "sink"


@dataclass(frozen=True, order=True)
class RuleConfig:
    A: int = 0
    B: int = 0
    C: int = 0
    D: int = 0
    E: int = 0
    F: int = 0

    def __post_init__(self):
        for f in RULES:
            v = getattr(self, f)
            top = 2 if f == "B" else 1
            if not isinstance(v, int) or not 0 <= v <= top:
                raise ValueError(f"rule {f} must be in 0..{top}, got {v!r}")

    def code(self) -> str:
        return "".join(str(getattr(self, f)) for f in RULES)

    @classmethod
    def parse(cls, code: str) -> "RuleConfig":
        code = str(code).strip()
        if len(code) != 6 or not code.isdigit():
            raise ValueError(f"bad rule code {code!r}")
        return cls(*(int(ch) for ch in code))

    def __str__(self):
        return self.code()


def enumerate_configs() -> list:
    """All 96 configurations, F varying fastest and A slowest."""
    return [RuleConfig(*v) for v in product((0, 1), (0, 1, 2), (0, 1), (0, 1), (0, 1), (0, 1))]


# --------------------------------------------------------------------------
# base model

# main line: source -t1- p1 -t2- p2 -t3(AND)- ... -t8(AND join)- p9 -t9- p10 (XOR) ...
_BASE_CHAIN = [
    ("source", "t1"), ("t1", "p1"), ("p1", "t2"), ("t2", "p2"), ("p2", "t3"),
    # AND block 1: branches t4-t5 and t6-t7
    ("t3", "p3"), ("t3", "p4"),
    ("p3", "t4"), ("t4", "p5"), ("p5", "t5"), ("t5", "p7"),
    ("p4", "t6"), ("t6", "p6"), ("p6", "t7"), ("t7", "p8"),
    ("p7", "t8"), ("p8", "t8"), ("t8", "p9"), ("p9", "t9"), ("t9", "p10"),
    # XOR block: t10-t11 or t12-t13
    ("p10", "t10"), ("t10", "p11"), ("p11", "t11"), ("t11", "p13"),
    ("p10", "t12"), ("t12", "p12"), ("p12", "t13"), ("t13", "p13"),
    ("p10", "t25"), ("t25", "p13"),
    # XOR split straight after the join: t14 or t26
    ("p13", "t14"), ("t14", "p14"), ("p13", "t26"), ("t26", "p14"), ("p14", "t15"),
    # AND block 2: t16 and t17 in parallel
    ("t15", "p15"), ("t15", "p16"), ("p15", "t16"), ("t16", "p17"),
    ("p16", "t17"), ("t17", "p18"), ("p17", "t18"), ("p18", "t18"),
    ("t18", "p19"), ("p19", "t19"), ("t19", "p20"), ("p20", "t20"), ("t20", "p21"),
    ("p21", "t21"), ("t21", "p22"), ("p22", "t22"), ("t22", "p23"), ("p23", "t23"),
    ("t23", "p24"), ("p24", "t24"), ("t24", "sink"),
]
_N_TASKS = 26


class _Draft:
    """Mutable net under construction."""

    def __init__(self, net: PetriNet):
        self.id = net.id
        self.places = list(net.places)
        self.labels = {t.id: t.label for t in net.transitions}
        self.arcs = [(a.source, a.target) for a in net.arcs]
        self.marking = dict(net.initial_marking)

    def place(self, pid):
        if pid not in self.places:
            self.places.append(pid)

    def transition(self, tid, label=None, inputs=(), outputs=()):
        self.labels[tid] = label
        for p in inputs:
            self.place(p)
            self.arcs.append((p, tid))
        for p in outputs:
            self.place(p)
            self.arcs.append((tid, p))

    def remove_arc(self, source, target):
        self.arcs.remove((source, target))

    def freeze(self, net_id) -> PetriNet:
        return PetriNet(net_id, self.places, [Transition(t, l) for t, l in self.labels.items()],
                        [Arc(s, t) for s, t in self.arcs], self.marking)


def base_model() -> PetriNet:
    labels = {f"t{i}": f"t{i}" for i in range(1, _N_TASKS + 1)}
    nodes = {n for e in _BASE_CHAIN for n in e}
    places = sorted(n for n in nodes if n not in labels)
    return PetriNet("000000", places, [Transition(t, l) for t, l in labels.items()],
                    [Arc(s, t) for s, t in _BASE_CHAIN], {SOURCE: 1})


# --------------------------------------------------------------------------
# rule edits; every site below is a fixed part of the design


def _rule_a(net: _Draft):
    net.transition("shortcut1", inputs=["p11"], outputs=["p14"])
    net.transition("shortcut2", inputs=["p19"], outputs=["p22"])
    net.transition("shortcut3", inputs=["p9"], outputs=["p13"])
    net.transition("shortcut4", inputs=["p21"], outputs=["p24"])


def _rule_b(net: _Draft, level: int):
    net.transition("tau_b1", inputs=["p17"], outputs=["p15"])
    net.transition("tau_b2", inputs=["p19"], outputs=["p14"])
    net.transition("tau_b3", inputs=["p24"], outputs=["p23"])
    net.transition("tau_b4", inputs=["p1"], outputs=["source"])
    net.transition("tau_b5", inputs=["p18"], outputs=["p16"])
    net.transition("tau_b6", inputs=["p22"], outputs=["p21"])
    net.transition("tau_b7", inputs=["p12"], outputs=["p10"])
    if level == 2:
        # exits from inside the loop bodies straight onto the main branch
        net.transition("tau_b8", inputs=["p11"], outputs=["p19"])
        net.transition("tau_b9", inputs=["p14"], outputs=["p19"])


def _rule_c(net: _Draft):
    # t3 now feeds a choice place; the silent routers start both branches,
    # only the first, or only the second (marking the other branch done)
    net.remove_arc("t3", "p3")
    net.remove_arc("t3", "p4")
    net.transition("t3", "t3", outputs=["p_or"])
    net.transition("tau_or1", inputs=["p_or"], outputs=["p3", "p4"])
    net.transition("tau_or2", inputs=["p_or"], outputs=["p3", "p8"])
    net.transition("tau_or3", inputs=["p_or"], outputs=["p4", "p7"])


_INVISIBLE = ("t10", "t13", "t19", "t21", "t22")


def _rule_d(net: _Draft):
    for tid in _INVISIBLE:
        net.labels[tid] = None


def _rule_e(net: _Draft):
    net.transition("gap1", inputs=["p9"], outputs=["p10"])
    net.transition("gap2", inputs=["p23"], outputs=["p24"])
    net.transition("gap3", inputs=["source"], outputs=["p1"])


def _rule_f(net: _Draft):
    # task t4 is repeated right after the XOR join
    net.remove_arc("p13", "t14")
    net.remove_arc("p13", "t26")
    net.transition("t_dup", "t4", inputs=["p13"], outputs=["p13b"])
    net.transition("t14", "t14", inputs=["p13b"])
    net.transition("t26", "t26", inputs=["p13b"])


def apply_rules(base: PetriNet, cfg: RuleConfig) -> PetriNet:
    net = _Draft(base)
    if cfg.A:
        _rule_a(net)
    if cfg.B:
        _rule_b(net, cfg.B)
    if cfg.C:
        _rule_c(net)
    if cfg.D:
        _rule_d(net)
    if cfg.E:
        _rule_e(net)
    if cfg.F:
        _rule_f(net)
    return net.freeze(cfg.code())


def generate_models() -> list:
    base = base_model()
    return [(cfg, apply_rules(base, cfg)) for cfg in enumerate_configs()]


# --------------------------------------------------------------------------
# dataset files


def dataset_filename(cfg: RuleConfig) -> str:
    return f"pdc_{cfg.code()}.pnml"


@dataclass
class ManifestEntry:
    file: str
    code: str
    A: int
    B: int
    C: int
    D: int
    E: int
    F: int

    @property
    def config(self) -> RuleConfig:
        return RuleConfig(self.A, self.B, self.C, self.D, self.E, self.F)


@dataclass
class DatasetManifest:
    directory: Path
    entries: list

    def configs(self) -> dict:
        return {e.code: e.config for e in self.entries}


def generate_dataset(directory) -> DatasetManifest:
    """Write the 96 PNML files plus ``manifest.json`` into ``directory``."""
    directory = Path(directory)
    entries = []
    try:
        directory.mkdir(parents=True, exist_ok=True)
        for cfg, net in generate_models():
            problems = validate(net)
            assert not problems, problems
            name = dataset_filename(cfg)
            write_pnml(net, directory / name)
            entries.append(ManifestEntry(name, cfg.code(), *(getattr(cfg, f) for f in RULES)))
        (directory / "manifest.json").write_text(
            json.dumps([asdict(e) for e in entries], indent=1) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write dataset to {directory}: {exc}") from exc
    return DatasetManifest(directory, entries)


def read_manifest(path) -> DatasetManifest:
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    try:
        records = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoError(f"cannot read manifest {path}: {exc}") from exc
    return DatasetManifest(path.parent, [ManifestEntry(**r) for r in records])
