"""Deterministic scripted profile standing in for the language models.

Every responder reads only the prompt text it is given, the same way a real
model would. Offline runs therefore exercise the full prompt -> reply ->
parse path. The plans are canned but coordinated: capture when the flag is
within reach, focus fire on the enemy closest to the flag, otherwise advance
at speed.
"""

from __future__ import annotations

import re
from typing import Optional

from .backends import STRATEGIC, TACTICAL, CompletionRequest, ScriptedBackend, ScriptRule
from .hexgrid import HexCoord, distance

# (pattern over the memory text, importance). First match wins.
IMPORTANCE_TABLE: tuple[tuple[str, int], ...] = (
    (r"(seiz|captur)\w*[^\n]*control point", 8),
    (r"destroyed|eliminat|shot down", 9),
    (r"poses a significant threat", 7),
    (r"approaching the control point", 6),
    (r"shooting at", 5),
    (r"\bplan at tick\b", 4),
    (r"accelerating", 3),
    (r"moving (on|along) the road", 1),
)
DEFAULT_IMPORTANCE = 2

_MEMORY = re.compile(r"^Memory: (.*)$", re.M)
_QUERY = re.compile(r"^Query: (.*)$", re.M)
_AGENT = re.compile(r"\b(red|blue) agents? (\d+)")


def importance_for(text: str) -> int:
    for pattern, score in IMPORTANCE_TABLE:
        if re.search(pattern, text, re.I):
            return score
    return DEFAULT_IMPORTANCE


def importance_reply(req: CompletionRequest) -> str:
    m = _MEMORY.search(req.last_user)
    return str(importance_for(m.group(1) if m else ""))


def relevance_for(memory: str, query: str) -> int:
    if memory.strip().lower() == query.strip().lower():
        return 10
    mem, q = memory.lower(), query.lower()
    if "control point" in mem and "control point" in q:
        return 7
    if set(_AGENT.findall(mem)) & set(_AGENT.findall(q)):
        return 6
    if any(side in mem and side in q for side in ("red", "blue")):
        return 3
    return 1


def relevance_reply(req: CompletionRequest) -> str:
    text = req.last_user
    mem, q = _MEMORY.search(text), _QUERY.search(text)
    return str(relevance_for(mem.group(1) if mem else "", q.group(1) if q else ""))


def _field(pattern: str, text: str, default: Optional[str] = None) -> Optional[str]:
    m = re.search(pattern, text)
    return m.group(1) if m else default


def summary_reply(req: CompletionRequest) -> str:
    text = req.last_user
    side = _field(r"commander of the (red|blue) side", text, "red")
    enemy = "blue" if side == "red" else "red"
    n = int(_field(r"Friendly agents alive: (\d+)", text, "0"))
    advancing = int(_field(r"Friendly agents advancing: (\d+)", text, "0"))
    k = int(_field(r"Enemy agents sighted: (\d+)", text, "0"))
    doing = "are moving towards the control point" if advancing else "are holding their positions"
    if k:
        return f"our {n} agents {doing} and have identified {k} {enemy} agents"
    return f"our {n} agents {doing} and have not identified any {enemy} agents"


_SEEN = re.compile(r"\b(red|blue) agent (\d+) is (.*?) at hexagon (\d{4})")
_SHOOT_FIRST = re.compile(r"unit (\d+) asks to modify its task: shoot first at (red|blue) agent (\d+)")


def _section(text: str, start: str, end: str) -> str:
    i = text.find(start)
    if i < 0:
        return ""
    j = text.find(end, i + len(start))
    return text[i + len(start): j if j >= 0 else None]


def plan_reply(req: CompletionRequest) -> str:
    text = req.last_user
    side = _field(r"commander of the (red|blue) side", text, "red")
    enemy = "blue" if side == "red" else "red"
    cp = HexCoord.from_id(_field(r"control point at hexagon (\d{4})", text, "0"))
    reach = int(_field(r"Weapon range: (\d+)", text, "2"))
    ids = [int(x) for x in re.findall(r"\d+", _field(r"every living \w+ agent \(([\d, ]+)\)", text, ""))]

    friends: dict[int, HexCoord] = {}
    foes: dict[int, HexCoord] = {}
    for s, uid, _, hex_id in _SEEN.findall(_section(text, "Observations:", "Memories:")):
        (friends if s == side else foes)[int(uid)] = HexCoord.from_id(hex_id)
    asked = {int(u): int(t) for u, s, t in _SHOOT_FIRST.findall(text) if s == enemy}

    def in_range(uid: int) -> list[int]:
        here = friends.get(uid)
        if here is None:
            return []
        return [e for e, pos in foes.items() if distance(here, pos) <= reach]

    # the enemy nearest the flag that someone can hit is everybody's first choice
    hittable = sorted({e for uid in ids for e in in_range(uid)}, key=lambda e: (distance(foes[e], cp), e))
    focus = hittable[0] if hittable else None

    lines = []
    for uid in ids:
        here = friends.get(uid)
        targets = in_range(uid)
        if here is not None and distance(here, cp) <= 2:
            lines.append(f"unit {uid} | capture the control point | {cp.label()} | 7")
        elif uid in asked and asked[uid] in foes:
            t = asked[uid]
            lines.append(f"unit {uid} | engage {enemy} agent {t} | {enemy} {t} | 8")
        elif targets:
            t = focus if focus in targets else min(targets, key=lambda e: (distance(foes[e], cp), e))
            lines.append(f"unit {uid} | engage {enemy} agent {t} | {enemy} {t} | 8")
        else:
            lines.append(f"unit {uid} | move towards the control point | {cp.label()} | 7")
    return "\n".join(lines)


_VIEW = re.compile(r"\(seen by [^,]+, distance (\d+)\) (red|blue) agent (\d+) is")


def tactical_reply(req: CompletionRequest) -> str:
    text = req.last_user
    side = _field(r"in charge of (red|blue) agent", text, "red")
    assignment = _field(r"Assignment: (.*)", text, "")
    reach = int(_field(r"Weapon range: (\d+)", text, "2"))
    parts = [p.strip() for p in assignment.split("|")]
    code = int(parts[3]) if len(parts) == 4 and parts[3].isdigit() else 0
    intent = parts[1].lower() if len(parts) > 1 else ""
    if 1 <= code <= 7 and "capture" not in intent:
        threats = sorted(
            (int(d), int(uid), s) for d, s, uid in _VIEW.findall(text) if s != side and 0 < int(d) <= reach
        )
        if threats:
            d, uid, s = threats[0]
            return (f"modify | shoot first at {s} agent {uid} | "
                    f"{s} agent {uid} sighted at distance {d}, within weapon range")
    return "accept"


REFLECTION_QUESTIONS = (
    "What threat do the enemy agents pose to our advance on the control point?",
    "Where should our agents concentrate their next moves?",
)


def questions_reply(req: CompletionRequest) -> str:
    n = int(_field(r"what are the (\d+) most salient", req.last_user, "2"))
    qs = [REFLECTION_QUESTIONS[i % len(REFLECTION_QUESTIONS)] for i in range(n)]
    return "\n".join(f"{i}. {q}" for i, q in enumerate(qs, 1))


def insight_reply(req: CompletionRequest) -> str:
    text = req.last_user
    side = _field(r"memory of (red|blue)", text, "red")
    enemy = "blue" if side == "red" else "red"
    statements = _section(text, "\n", "\nQuestion:")
    if re.search(rf"{enemy} agent \d+ is (approaching|accelerating|seizing)", statements) or re.search(
        rf"{enemy} agent[^\n]*(accelerating|approaching)", statements
    ):
        return (f"The {enemy} agent poses a significant threat and may create a disadvantageous "
                f"situation for the {side} agent in this confrontation.")
    if re.search(rf"{side} agent \d+ is (approaching|accelerating)", statements):
        return f"The {side} agents are closing on the control point without meeting resistance."
    return "The situation around the control point is stable."


def scorer_rules() -> list[ScriptRule]:
    """Importance and relevance calibrated to the worked examples (road = 1, seizing the flag = 8)."""
    return [
        ScriptRule("Importance score:", importance_reply),
        ScriptRule("Relevance score:", relevance_reply),
    ]


def gwa_rules() -> list[ScriptRule]:
    return scorer_rules() + [
        ScriptRule("Planning: assign", plan_reply, tier=STRATEGIC),
        ScriptRule("Turn the situation below into a summary", summary_reply, tier=STRATEGIC),
        ScriptRule("most salient high-level questions", questions_reply),
        ScriptRule("What high-level insight", insight_reply),
        ScriptRule("Is the assignment suitable", tactical_reply, tier=TACTICAL),
    ]


def scripted_backend(capture: bool = False) -> ScriptedBackend:
    return ScriptedBackend(gwa_rules(), capture=capture)


def scorer_backend(capture: bool = False) -> ScriptedBackend:
    return ScriptedBackend(scorer_rules(), capture=capture)
