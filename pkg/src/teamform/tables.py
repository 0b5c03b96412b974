"""Legal joint configurations of a primary-utility pair and their transitions.

A configuration of the pair ``(p, u)`` consists of

* whether ``p.tok > 0``,
* whether ``u`` is in ``p.busy_acked`` and in ``p.meds``,
* ``u.busy_toks(p)`` as one of ``None`` (undefined), ``0`` or ``">0"``,
* whether ``p`` is in ``u.chan``,
* the channel-layer messages in transit on the link ``p -> u`` and on the
  link ``u -> p``, written newest first with the codes of
  :data:`teamform.channel.CODES` (``B`` Busy, ``T`` TokensUpdate, ``N``
  NotBusy, ``A`` BusyAck, ``C`` Channel, ``X`` NoChannel).

ChannelAck and relayed traffic are not part of the configuration.
"""

from __future__ import annotations

import re
from collections import deque

POS = ">0"

# row: (tok>0, acked, med, busy_toks, in chan, p->u regex, u->p regex)
ROWS = {
    1: (False, False, False, None, False, "B*", "X?(CX)*C?"),
    2: (False, False, False, 0, False, "B*", "AX?(CX)*C?"),
    3: (False, False, False, 0, False, "B*NT*B*", ""),
    4: (False, False, False, POS, False, "B*NT*", "(XC)*X?"),
    5: (False, False, False, POS, True, "B*NT*", "(CX)*C?"),
    6: (True, False, False, None, False, "B+", "X?(CX)*C?"),
    7: (True, False, False, 0, False, "B*", "AX?(CX)*C?"),
    8: (True, False, False, 0, False, "B+NT*B*", ""),
    9: (True, False, False, POS, False, "B+NT*", "(XC)*X?"),
    10: (True, False, False, POS, True, "B+NT*", "(CX)*C?"),
    11: (True, True, False, 0, False, "T+B*", ""),
    12: (True, True, False, POS, False, "T*", "(XC)*"),
    13: (True, True, False, POS, True, "T*", "C(XC)*"),
    14: (True, True, True, POS, False, "T*", "X(CX)*"),
    15: (True, True, True, POS, True, "T*", "(CX)*"),
}

# transition columns
TOK_UP = 0  # tok increases within the positive integers
TOK_ZERO = 1  # "tok = 0" toggles
MED = 2  # "u mediates p" toggles
U_RECV_B, U_RECV_TU, U_RECV_NB = 3, 4, 5
P_RECV_BA, P_RECV_C, P_RECV_NC = 6, 7, 8

COLUMNS = ("tok_up", "tok_zero", "mediates", "u_recv_Busy", "u_recv_TokensUpdate",
           "u_recv_NotBusy", "p_recv_BusyAck", "p_recv_Channel", "p_recv_NoChannel")

_ = None
TRANSITIONS = {
    1: (_, 6, _, 2, _, _, _, 1, 1),
    2: (_, 7, _, 2, _, _, 3, 2, 2),
    3: (_, 8, _, 3, 4, 1, _, _, _),
    4: (_, 9, 5, _, 4, 1, _, 4, 4),
    5: (_, 10, 4, _, 5, 1, _, 5, 5),
    6: (6, 1, _, 7, _, _, _, 6, 6),
    7: (7, 2, _, 7, _, _, 11, 7, 7),
    8: (8, 3, _, 8, 9, 6, _, 8, 8),
    9: (9, 4, 10, _, 9, 6, _, 9, 9),
    10: (10, 5, 9, _, 10, 6, _, 10, 10),
    11: (11, 3, _, 11, 12, _, _, _, _),
    12: (12, 4, 13, _, 12, _, _, 14, _),
    13: (13, 5, 12, _, 13, _, _, 15, _),
    14: (14, 4, 15, _, 14, _, _, _, 12),
    15: (15, 5, 14, _, 15, _, _, _, 13),
}
del _

RECEIVE_COLUMN = {("u", "Busy"): U_RECV_B, ("u", "TokensUpdate"): U_RECV_TU,
                  ("u", "NotBusy"): U_RECV_NB, ("p", "BusyAck"): P_RECV_BA,
                  ("p", "Channel"): P_RECV_C, ("p", "NoChannel"): P_RECV_NC}

_BY_FLAGS: dict = {}
for _row, (_t, _a, _m, _b, _c, _pu, _up) in ROWS.items():
    _BY_FLAGS.setdefault((_t, _a, _m, _b, _c), []).append(
        (_row, re.compile(_pu), re.compile(_up)))


def busy_class(value):
    """Map a ``busy_toks`` value to ``None``, ``0`` or ``">0"``."""
    if value is None:
        return None
    return POS if value > 0 else 0


def matching_rows(tok_pos: bool, acked: bool, med: bool, busy_toks, in_chan: bool,
                  link_pu: str, link_up: str) -> frozenset:
    """Rows of the table that a configuration matches (usually exactly one)."""
    key = (tok_pos, acked, med, busy_class(busy_toks), in_chan)
    out = []
    for row, rpu, rup in _BY_FLAGS.get(key, ()):
        if rpu.fullmatch(link_pu) and rup.fullmatch(link_up):
            out.append(row)
    return frozenset(out)


def reachable(start: frozenset, target: frozenset, budget: dict, required=None) -> bool:
    """Whether some row of ``target`` is reachable from some row of ``start``.

    ``budget`` maps optional columns to the maximum number of times they may
    be used; ``required`` (a column) must be used exactly once.
    """
    cols = sorted(budget)
    init_used = tuple(0 for _ in cols)
    seen = set()
    todo = deque((r, init_used, False) for r in start)
    while todo:
        row, used, got = todo.popleft()
        if (row, used, got) in seen:
            continue
        seen.add((row, used, got))
        if row in target and (required is None or got):
            return True
        trans = TRANSITIONS[row]
        for i, col in enumerate(cols):
            if used[i] < budget[col] and trans[col] is not None:
                nu = used[:i] + (used[i] + 1,) + used[i + 1:]
                todo.append((trans[col], nu, got))
        if required is not None and not got and trans[required] is not None:
            todo.append((trans[required], used, True))
    return False
