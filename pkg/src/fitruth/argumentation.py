"""Argument trees over perturbation evidence, their U/D marking and the dialogue.

The tree is rooted at the user's claim that the explanation is untrusted::

    α1  <-rebuttal-  α2  <-undercut-  α3  <-undercut-  α4(j)  <-undercut-  α5(j)  <-undercut-  α6(j, Inc), α6(j, Dec)

α3 bundles one "z_j is untruthful" atom per challenged feature. The user
challenges the features the evidence condemns, or every feature when none is
condemned. α5(j) is answered by the pair of α6 arguments only when both
alterations of feature j behaved as expected.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterator

import numpy as np

from . import kernels
from .errors import ContractError
from .investigator import Alt, Exp, FeatureEvidence, TruthReport


class Mark(str, Enum):
    U = "U"
    D = "D"


class Judgement(str, Enum):
    WARRANTED = "Warranted"
    UNWARRANTED = "Unwarranted"


class AttackKind(str, Enum):
    REBUTTAL = "rebuttal"
    UNDERCUT = "undercut"


# (attacker schema, target schema) -> kind
LICENSED_ATTACKS = {
    (2, 1): AttackKind.REBUTTAL,
    (1, 2): AttackKind.REBUTTAL,
    (3, 2): AttackKind.UNDERCUT,
    (4, 3): AttackKind.UNDERCUT,
    (5, 4): AttackKind.UNDERCUT,
    (6, 5): AttackKind.UNDERCUT,
}

_ALT_SHORT = {Alt.INCREASING: "Inc", Alt.DECREASING: "Dec"}
_ALT_PAST = {Alt.INCREASING: "Increased", Alt.DECREASING: "Decreased"}
_EXP_PAST = {Exp.INCREASING: "Increased", Exp.DECREASING: "Decreased", Exp.STABLE: "Remaining Stable"}


# --------------------------------------------------------------------------
# atom templates

def text_a() -> str:
    return "The explanation is untrusted"


def text_b() -> str:
    return "The explanation is trusted"


def text_c(name: str) -> str:
    return f"The importance of {name} is untruthful"


def text_d(ev: FeatureEvidence) -> str:
    inc, dec = ev.records
    return (
        f"The importance of {ev.name} is truthful since it has a {ev.imp.value} influence, "
        f"and when its value is {inc.alt.value} locally, we observe that the probability is {inc.expected.value}, "
        f"and when its value is {dec.alt.value} locally, we observe that the probability is {dec.expected.value}"
    )


def text_e(ev: FeatureEvidence, alt: Alt) -> str:
    rec = ev.increasing if alt is Alt.INCREASING else ev.decreasing
    return (
        f"{ev.name} has a {ev.imp.value} influence and is therefore expected the probability "
        f"to be {_EXP_PAST[rec.expected]} by {alt.value} its value"
    )


def text_f(ev: FeatureEvidence, alt: Alt) -> str:
    rec = ev.increasing if alt is Alt.INCREASING else ev.decreasing
    head = f"{ev.name}'s value got {_ALT_PAST[alt]} and evaluated and the probability is {_EXP_PAST[rec.observed]}"
    if rec.matched:
        return head + " as expected"
    return head + f", not {_EXP_PAST[rec.expected]} as expected"


# --------------------------------------------------------------------------
# arguments and trees

@dataclass(frozen=True)
class Atom:
    symbol: str  # e.g. "a", "c_2", "e_2,Inc"
    text: str


@dataclass(frozen=True)
class Argument:
    id: str
    schema: int
    support: tuple[str, ...]
    claim: str
    speaker: str
    atoms: tuple[Atom, ...] = ()
    feature: int | None = None
    alt: Alt | None = None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "schema": self.schema,
            "support": list(self.support),
            "claim": self.claim,
            "speaker": self.speaker,
            "atoms": [{"symbol": a.symbol, "text": a.text} for a in self.atoms],
            "feature": self.feature,
            "alt": None if self.alt is None else self.alt.value,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Argument":
        return cls(
            doc["id"], int(doc["schema"]), tuple(doc["support"]), doc["claim"], doc["speaker"],
            tuple(Atom(a["symbol"], a["text"]) for a in doc.get("atoms", [])),
            doc.get("feature"), None if doc.get("alt") is None else Alt(doc["alt"]),
        )


@dataclass(frozen=True)
class Node:
    id: str
    children: tuple["Node", ...] = ()
    attack: AttackKind | None = None  # kind of this node's attack on its parent
    argument: Argument | None = None
    mark: Mark | None = None

    def walk(self) -> Iterator["Node"]:
        yield self
        for child in self.children:
            yield from child.walk()


@dataclass(frozen=True)
class ArgumentTree:
    root: Node
    technique: str | None = None
    feature_names: tuple[str, ...] = field(default=(), compare=False)

    def nodes(self) -> list[Node]:
        return list(self.root.walk())

    def __len__(self):
        return sum(1 for _ in self.root.walk())

    def find(self, node_id: str) -> Node:
        for node in self.root.walk():
            if node.id == node_id:
                return node
        raise KeyError(node_id)

    def edges(self) -> list[tuple[str, str, AttackKind | None]]:
        """(attacker, target, kind) triples."""
        out = []
        for node in self.root.walk():
            for child in node.children:
                out.append((child.id, node.id, child.attack))
        return out

    @property
    def is_marked(self) -> bool:
        return all(n.mark is not None for n in self.root.walk())


def _arg_node(arg: Argument, attack: AttackKind | None, children=()) -> Node:
    return Node(arg.id, tuple(children), attack, arg)


def challenged_features(report: TruthReport) -> list[int]:
    bad = report.untruthful
    return sorted(bad) if bad else report.features


def build_tree(report: TruthReport) -> ArgumentTree:
    if not report.evidence:
        raise ContractError("cannot build an argument tree from an empty report")
    evidence = {ev.feature: ev for ev in report.evidence}
    names = tuple(ev.name for ev in report.evidence)

    feature_branches = []
    for j in challenged_features(report):
        ev = evidence[j]
        alpha6 = []
        if ev.truthful:
            for alt in (Alt.INCREASING, Alt.DECREASING):
                s = _ALT_SHORT[alt]
                arg6 = Argument(
                    f"α6({j},{s})", 6,
                    (f"f_{j},{s}", f"f_{j},{s} → ¬e_{j},{s}"), f"¬e_{j},{s}", "system",
                    (Atom(f"f_{j},{s}", text_f(ev, alt)),), j, alt,
                )
                alpha6.append(_arg_node(arg6, AttackKind.UNDERCUT))
        arg5 = Argument(
            f"α5({j})", 5,
            (f"e_{j},Inc", f"e_{j},Dec", f"(e_{j},Inc ∧ e_{j},Dec) → ¬d_{j}"), f"¬d_{j}", "user",
            (Atom(f"e_{j},Inc", text_e(ev, Alt.INCREASING)), Atom(f"e_{j},Dec", text_e(ev, Alt.DECREASING))), j,
        )
        arg4 = Argument(
            f"α4({j})", 4, (f"d_{j}", f"d_{j} → ¬c_{j}"), f"¬c_{j}", "system",
            (Atom(f"d_{j}", text_d(ev)),), j,
        )
        feature_branches.append(
            _arg_node(arg4, AttackKind.UNDERCUT, [_arg_node(arg5, AttackKind.UNDERCUT, alpha6)])
        )

    challenged = challenged_features(report)
    cs = tuple(f"c_{j}" for j in challenged)
    arg3 = Argument(
        "α3", 3, cs + (f"({' ∧ '.join(cs)}) → ¬b",), "¬b", "user",
        tuple(Atom(f"c_{j}", text_c(evidence[j].name)) for j in challenged),
    )
    arg2 = Argument("α2", 2, ("b", "b → ¬a"), "¬a", "system", (Atom("b", text_b()),))
    arg1 = Argument("α1", 1, ("a",), "a", "user", (Atom("a", text_a()),))
    root = _arg_node(arg1, None, [
        _arg_node(arg2, AttackKind.REBUTTAL, [
            _arg_node(arg3, AttackKind.UNDERCUT, feature_branches)
        ])
    ])
    return ArgumentTree(root, report.technique, names)


def _mark_node(node: Node) -> Node:
    children = tuple(_mark_node(c) for c in node.children)
    defeated = any(c.mark is Mark.U for c in children)
    return replace(node, children=children, mark=Mark.D if defeated else Mark.U)


def mark(tree: ArgumentTree) -> ArgumentTree:
    """Post-order marking: a node is D iff one of its children is U; leaves are U."""
    return replace(tree, root=_mark_node(tree.root))


def judge(tree: ArgumentTree) -> Judgement:
    """Warranted iff the root is undefeated (the explanation stays untrusted)."""
    if not tree.is_marked:
        tree = mark(tree)
    return Judgement.WARRANTED if tree.root.mark is Mark.U else Judgement.UNWARRANTED


def evaluate_report(report: TruthReport) -> tuple[ArgumentTree, Judgement]:
    tree = mark(build_tree(report))
    return tree, judge(tree)


# --------------------------------------------------------------------------
# exhaustive check of the marking

def flatten(tree: ArgumentTree) -> tuple[list[Node], np.ndarray]:
    """Breadth-first node list and the matching parent array (root's parent is -1)."""
    order: list[Node] = []
    parents: list[int] = []
    queue = deque([(tree.root, -1)])
    while queue:
        node, parent = queue.popleft()
        idx = len(order)
        order.append(node)
        parents.append(parent)
        queue.extend((c, idx) for c in node.children)
    return order, np.array(parents, dtype=np.int64)


def brute_force_marks(tree: ArgumentTree) -> list[Mark]:
    """Marks obtained by trying every U/D labeling and keeping the consistent one.

    Returned in breadth-first order (see :func:`flatten`). Independent of
    :func:`mark`; raises if the labeling is not unique.
    """
    order, parents = flatten(tree)
    masks = np.zeros(len(order), dtype=np.uint64)
    for child, parent in enumerate(parents):
        if parent >= 0:
            masks[parent] |= np.uint64(1 << child)
    count, labeling = kernels.count_consistent_labelings(masks)
    if count != 1:
        raise ContractError(f"expected exactly one consistent labeling, found {count}")
    return [Mark.U if (labeling >> i) & 1 else Mark.D for i in range(len(order))]


# --------------------------------------------------------------------------
# dialogue

@dataclass(frozen=True)
class Turn:
    speaker: str
    source: str  # argument id, or the atom symbol of a reported observation
    text: str
    detail: str = ""

    def __str__(self):
        tail = f" ({self.detail})" if self.detail else ""
        return f"{self.speaker.capitalize()}: {self.text}{tail}"

    def to_dict(self) -> dict:
        return {"speaker": self.speaker, "source": self.source, "text": self.text, "detail": self.detail}


def render_dialogue(tree: ArgumentTree, report: TruthReport) -> list[Turn]:
    """Natural-language turns, level by level down the tree.

    Every test of a challenged feature is reported by the system, including the
    ones that did not go as expected (those carry no α6 argument).
    """
    evidence = {ev.feature: ev for ev in report.evidence}
    turns: list[Turn] = []
    order, _ = flatten(tree)
    by_schema: dict[int, list[Node]] = {}
    for node in order:
        if node.argument is not None:
            by_schema.setdefault(node.argument.schema, []).append(node)

    def say(node: Node, detail: str = ""):
        arg = node.argument
        text = "; ".join(a.text for a in arg.atoms)
        turns.append(Turn(arg.speaker, arg.id, text, detail))

    for schema in (1, 2, 3, 4, 5):
        for node in by_schema.get(schema, []):
            say(node)
    for node in by_schema.get(5, []):
        ev = evidence[node.argument.feature]
        for rec in ev.records:
            s = _ALT_SHORT[rec.alt]
            detail = (f"{ev.name}: {rec.altered_value:.4g}, probability "
                      f"{rec.probability_before:.4f} -> {rec.probability_after:.4f}")
            source = f"α6({ev.feature},{s})" if ev.truthful else f"f_{ev.feature},{s}"
            turns.append(Turn("system", source, text_f(ev, rec.alt), detail))
    return turns


def format_dialogue(turns: list[Turn]) -> str:
    return "\n".join(str(t) for t in turns) + "\n"


# --------------------------------------------------------------------------
# export

EXPORT_FORMATS = ("text", "dot", "json")


def _label(node: Node) -> str:
    return node.id if node.mark is None else f"{node.id} [{node.mark.value}]"


def _claim_text(node: Node) -> str:
    if node.argument is None:
        return ""
    return f" {node.argument.claim}: " + "; ".join(a.text for a in node.argument.atoms)


def tree_to_dict(tree: ArgumentTree) -> dict:
    nodes = []
    for node in tree.root.walk():
        nodes.append({
            "id": node.id,
            "mark": None if node.mark is None else node.mark.value,
            "argument": None if node.argument is None else node.argument.to_dict(),
        })
    edges = [{"attacker": a, "target": t, "kind": None if k is None else k.value} for a, t, k in tree.edges()]
    return {"technique": tree.technique, "feature_names": list(tree.feature_names),
            "root": tree.root.id, "nodes": nodes, "edges": edges}


def tree_from_dict(doc: dict) -> ArgumentTree:
    info = {n["id"]: n for n in doc["nodes"]}
    kids: dict[str, list[tuple[str, str | None]]] = {nid: [] for nid in info}
    for e in doc["edges"]:
        kids[e["target"]].append((e["attacker"], e["kind"]))

    def build(nid: str, kind: str | None) -> Node:
        n = info[nid]
        return Node(
            nid,
            tuple(build(c, k) for c, k in kids[nid]),
            None if kind is None else AttackKind(kind),
            None if n["argument"] is None else Argument.from_dict(n["argument"]),
            None if n["mark"] is None else Mark(n["mark"]),
        )

    return ArgumentTree(build(doc["root"], None), doc.get("technique"), tuple(doc.get("feature_names", ())))


def _dot_escape(s: str) -> str:
    return s.replace("\\", "\\\\").replace('"', '\\"')


def export_tree(tree: ArgumentTree, fmt: str = "text") -> str:
    if fmt == "text":
        lines = []

        def emit(node: Node, depth: int):
            via = f"({node.attack.value}) " if node.attack is not None else ""
            lines.append("  " * depth + via + _label(node) + _claim_text(node))
            for child in node.children:
                emit(child, depth + 1)

        emit(tree.root, 0)
        return "\n".join(lines) + "\n"
    if fmt == "dot":
        order, _ = flatten(tree)
        index = {id(n): i for i, n in enumerate(order)}
        lines = ["digraph argument_tree {", "  rankdir=BT;"]
        for i, node in enumerate(order):
            lines.append(f'  n{i} [label="{_dot_escape(_label(node))}"];')
        for node in order:
            for child in node.children:
                kind = child.attack.value if child.attack is not None else "attack"
                lines.append(f'  n{index[id(child)]} -> n{index[id(node)]} [label="{kind}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"
    if fmt == "json":
        return json.dumps(tree_to_dict(tree), indent=2, ensure_ascii=False) + "\n"
    raise ContractError(f"unknown export format {fmt!r}; choose from {', '.join(EXPORT_FORMATS)}")
