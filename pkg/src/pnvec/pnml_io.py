"""Petri nets and a small PNML reader/writer.

Only the structural subset is supported: ``net``, ``page``, ``place``,
``transition``, ``arc``, ``name`` and ``initialMarking``.  Everything else
(graphics, tool annotations other than invisibility markers) is ignored.
"""

from __future__ import annotations

import re
import xml.etree.ElementTree as ET
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional

from .errors import ParseError, StructureError

PNML_NS = "http://www.pnml.org/version-2009/grammar/pnml"
PTNET_TYPE = "http://www.pnml.org/version-2009/grammar/ptnet"

_DIGITS = re.compile(r"(\d+)")


def natural_key(s: str):
    """Sort key that orders ``t2`` before ``t10``."""
    return [(0, int(part), "") if part.isdigit() else (1, 0, part) for part in _DIGITS.split(s) if part]


@dataclass(frozen=True)
class Transition:
    id: str
    label: Optional[str] = None

    def __post_init__(self):
        if self.label == "":
            object.__setattr__(self, "label", None)

    @property
    def silent(self) -> bool:
        return self.label is None


@dataclass(frozen=True)
class Arc:
    source: str
    target: str


@dataclass(frozen=True)
class PetriNet:
    """A place/transition net.

    Node and arc collections are kept in canonical order (natural sort by id,
    arcs by ``(source, target)``) so that two nets describing the same graph
    compare equal regardless of how they were assembled.  Zero entries of the
    initial marking are dropped for the same reason.
    """

    id: str
    places: tuple = ()
    transitions: tuple = ()
    arcs: tuple = ()
    initial_marking: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        places = tuple(sorted(self.places, key=natural_key))
        transitions = tuple(sorted(self.transitions, key=lambda t: (natural_key(t.id), t.label or "")))
        arcs = tuple(sorted(self.arcs, key=lambda a: (natural_key(a.source), natural_key(a.target))))
        marking = {p: int(c) for p, c in sorted(self.initial_marking.items(), key=lambda kv: natural_key(kv[0])) if c != 0}
        object.__setattr__(self, "places", places)
        object.__setattr__(self, "transitions", transitions)
        object.__setattr__(self, "arcs", arcs)
        object.__setattr__(self, "initial_marking", marking)

    def transition(self, tid: str) -> Transition:
        for t in self.transitions:
            if t.id == tid:
                return t
        raise KeyError(tid)

    @property
    def labels(self) -> list:
        return [t.label for t in self.transitions if not t.silent]

    @property
    def silent_transitions(self) -> list:
        return [t for t in self.transitions if t.silent]

    def preset(self, node: str) -> list:
        return [a.source for a in self.arcs if a.target == node]

    def postset(self, node: str) -> list:
        return [a.target for a in self.arcs if a.source == node]


# --------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    nodes: tuple
    message: str = ""

    @property
    def kind(self) -> str:
        return type(self).__name__


class DuplicateId(Violation):
    pass


class DanglingArc(Violation):
    pass


class BipartiteViolation(Violation):
    pass


class SelfLoopArc(Violation):
    pass


class BadMarking(Violation):
    pass


def validate(net: PetriNet) -> list:
    """Return one violation per broken structural invariant (empty if valid)."""
    out = []
    place_counts = Counter(net.places)
    trans_counts = Counter(t.id for t in net.transitions)
    for pid, c in place_counts.items():
        if c > 1:
            out.append(DuplicateId((pid,), f"place id {pid!r} occurs {c} times"))
    for tid, c in trans_counts.items():
        if c > 1:
            out.append(DuplicateId((tid,), f"transition id {tid!r} occurs {c} times"))
    for nid in sorted(set(place_counts) & set(trans_counts), key=natural_key):
        out.append(DuplicateId((nid,), f"id {nid!r} names both a place and a transition"))

    places, transitions = set(place_counts), set(trans_counts)
    for a in net.arcs:
        if a.source == a.target:
            out.append(SelfLoopArc((a.source, a.target), "arc source equals target"))
            continue
        missing = [n for n in (a.source, a.target) if n not in places and n not in transitions]
        if missing:
            out.append(DanglingArc((a.source, a.target), f"unknown node(s) {missing}"))
            continue
        if (a.source in places) == (a.target in places):
            kind = "place" if a.source in places else "transition"
            out.append(BipartiteViolation((a.source, a.target), f"arc joins {kind} to {kind}"))

    for pid, c in net.initial_marking.items():
        if pid not in places:
            out.append(BadMarking((pid,), "marking refers to unknown place"))
        elif c < 0:
            out.append(BadMarking((pid,), f"negative token count {c}"))
    return out


# --------------------------------------------------------------------------
# parsing


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _children(elem, name):
    return [c for c in elem if _local(c.tag) == name]


def _text_of(elem) -> Optional[str]:
    """Text of a ``<name>``/``<initialMarking>``-style element (``<text>`` child)."""
    for child in elem:
        if _local(child.tag) in ("text", "value"):
            return (child.text or "").strip()
    return None


def _is_invisible_marker(elem) -> bool:
    if _local(elem.tag) != "toolspecific":
        return False
    if elem.get("activity", "").strip() == "$invisible$":
        return True
    return elem.get("invisible", "").strip().lower() == "true"


def _walk_nodes(elem, places, transitions, arcs):
    # pages may nest; everything is flattened into one net
    for child in elem:
        tag = _local(child.tag)
        if tag == "page":
            _walk_nodes(child, places, transitions, arcs)
        elif tag == "place":
            places.append(child)
        elif tag == "transition":
            transitions.append(child)
        elif tag == "arc":
            arcs.append(child)


def parse_pnml(data: bytes, net_id: Optional[str] = None) -> PetriNet:
    """Parse PNML bytes into a :class:`PetriNet`.

    Raises :class:`ParseError` for malformed XML and :class:`StructureError`
    when the described graph is not a valid Petri net.
    """
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise ParseError(f"malformed XML: {exc}") from exc

    if _local(root.tag) == "net":
        net_elem = root
    else:
        nets = [e for e in root.iter() if _local(e.tag) == "net"]
        if not nets:
            raise ParseError("no <net> element found")
        net_elem = nets[0]

    place_elems, trans_elems, arc_elems = [], [], []
    _walk_nodes(net_elem, place_elems, trans_elems, arc_elems)

    places, marking = [], {}
    for p in place_elems:
        pid = p.get("id")
        if not pid:
            raise ParseError("place without id")
        places.append(pid)
        for m in _children(p, "initialMarking"):
            txt = _text_of(m)
            if txt:
                try:
                    marking[pid] = int(txt)
                except ValueError as exc:
                    raise ParseError(f"bad initial marking {txt!r} on place {pid!r}") from exc

    transitions = []
    for t in trans_elems:
        tid = t.get("id")
        if not tid:
            raise ParseError("transition without id")
        label = None
        for n in _children(t, "name"):
            label = _text_of(n) or None
        if any(_is_invisible_marker(c) for c in t):
            label = None
        transitions.append(Transition(tid, label))

    arcs = []
    for a in arc_elems:
        src, tgt = a.get("source"), a.get("target")
        if src is None or tgt is None:
            raise ParseError("arc without source/target")
        arcs.append(Arc(src, tgt))

    net = PetriNet(net_id or net_elem.get("id") or "net", places, transitions, arcs, marking)
    problems = validate(net)
    if problems:
        detail = "; ".join(f"{v.kind}{v.nodes}: {v.message}" for v in problems)
        raise StructureError(detail)
    return net


# --------------------------------------------------------------------------
# serialization


def serialize_pnml(net: PetriNet) -> bytes:
    """Emit deterministic PNML for ``net`` (places, transitions, arcs; each sorted)."""
    root = ET.Element("pnml", {"xmlns": PNML_NS})
    net_el = ET.SubElement(root, "net", {"id": net.id, "type": PTNET_TYPE})
    if net.places or net.transitions or net.arcs:
        page = ET.SubElement(net_el, "page", {"id": "page0"})
        for pid in net.places:
            p = ET.SubElement(page, "place", {"id": pid})
            ET.SubElement(ET.SubElement(p, "name"), "text").text = pid
            if net.initial_marking.get(pid):
                m = ET.SubElement(p, "initialMarking")
                ET.SubElement(m, "text").text = str(net.initial_marking[pid])
        for t in net.transitions:
            te = ET.SubElement(page, "transition", {"id": t.id})
            if t.silent:
                ET.SubElement(te, "toolspecific", {"tool": "ProM", "version": "6.4", "activity": "$invisible$"})
            else:
                ET.SubElement(ET.SubElement(te, "name"), "text").text = t.label
        for i, a in enumerate(net.arcs):
            ET.SubElement(page, "arc", {"id": f"a{i}", "source": a.source, "target": a.target})
    ET.indent(root, space="  ")
    return ET.tostring(root, encoding="utf-8", xml_declaration=True) + b"\n"


def read_pnml(path, net_id: Optional[str] = None) -> PetriNet:
    path = Path(path)
    return parse_pnml(path.read_bytes(), net_id=net_id)


def write_pnml(net: PetriNet, path) -> None:
    Path(path).write_bytes(serialize_pnml(net))


def model_id_from_path(path) -> str:
    """Model id for a dataset file: the stem without a ``pdc_``/``pdc2023_`` prefix."""
    stem = Path(path).stem
    return re.sub(r"^pdc(?:2023)?_", "", stem)


def load_directory(directory) -> list:
    """Parse every ``*.pnml`` file in ``directory`` (sorted by name), ids from file names."""
    paths = sorted(Path(directory).glob("*.pnml"), key=lambda p: natural_key(p.name))
    return [read_pnml(p, net_id=model_id_from_path(p)) for p in paths]


def net_from_edges(net_id: str, edges: Iterable[tuple], labels: Mapping[str, Optional[str]], marking=None) -> PetriNet:
    """Build a net from ``(source, target)`` pairs; nodes listed in ``labels`` are transitions."""
    edges = list(edges)
    nodes = {n for e in edges for n in e} | set(labels)
    places = [n for n in nodes if n not in labels]
    transitions = [Transition(tid, lab) for tid, lab in labels.items()]
    return PetriNet(net_id, places, transitions, [Arc(s, t) for s, t in edges], dict(marking or {}))
