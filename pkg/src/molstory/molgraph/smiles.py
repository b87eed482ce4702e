"""SMILES reading and writing for the supported organic subset.

Grammar: organic-subset atoms (``B C N O P S F Cl Br I`` and aromatic
``b c n o p s``), bracket atoms ``[sym Hn ±q]``, bonds ``- = # :``,
branches, ring closures ``0-9`` and ``%nn``, and ``.`` separators. Bond
stereo marks ``/ \\`` read as single bonds and ``@`` marks are ignored.
"""
from .graph import (
    AROMATIC, DOUBLE, SINGLE, TRIPLE, Atom, Bond, MoleculeError, MolGraph,
    ValenceError, fill_valence, kekulize,
)

ORGANIC = ("Cl", "Br", "B", "C", "N", "O", "P", "S", "F", "I")
AROMATIC_ORGANIC = ("b", "c", "n", "o", "p", "s")
BOND_SYMBOLS = {"-": SINGLE, "=": DOUBLE, "#": TRIPLE, ":": AROMATIC,
                "/": SINGLE, "\\": SINGLE}
_SYMBOL_FOR_ORDER = {DOUBLE: "=", TRIPLE: "#"}


class SmilesError(MoleculeError):
    def __init__(self, message, position=None):
        self.position = position
        if position is not None:
            message = f"{message} at position {position}"
        super().__init__(message)


class _RawAtom:
    __slots__ = ("element", "charge", "aromatic", "explicit_h", "pos")

    def __init__(self, element, charge, aromatic, explicit_h, pos):
        self.element = element
        self.charge = charge
        self.aromatic = aromatic
        self.explicit_h = explicit_h
        self.pos = pos


def _parse_bracket(text, start):
    """Parse ``[...]`` beginning at ``start``; returns (_RawAtom, next index)."""
    end = text.find("]", start)
    if end < 0:
        raise SmilesError("unclosed bracket atom", start + 1)
    body = text[start + 1:end]
    i = 0
    if i < len(body) and body[i].isdigit():
        raise SmilesError("isotopes are not supported", start + 2)
    symbol = None
    for cand in ("Cl", "Br", "B", "C", "N", "O", "P", "S", "F", "I", "H",
                 "b", "c", "n", "o", "p", "s"):
        if body.startswith(cand, i):
            symbol = cand
            break
    if symbol is None:
        raise SmilesError("unsupported element", start + 2)
    i += len(symbol)
    while i < len(body) and body[i] == "@":
        i += 1
    h = 0
    if i < len(body) and body[i] == "H":
        i += 1
        h = 1
        if i < len(body) and body[i].isdigit():
            h = int(body[i])
            i += 1
    charge = 0
    if i < len(body) and body[i] in "+-":
        sign = 1 if body[i] == "+" else -1
        i += 1
        if i < len(body) and body[i].isdigit():
            charge = sign * int(body[i])
            i += 1
        else:
            charge = sign
            while i < len(body) and body[i] == ("+" if sign > 0 else "-"):
                charge += sign
                i += 1
    if i != len(body):
        raise SmilesError("unexpected character in bracket atom", start + 2 + i)
    aromatic = symbol.islower()
    element = symbol.capitalize() if aromatic else symbol
    return _RawAtom(element, charge, aromatic, h, start + 1), end + 1


def parse_smiles(text):
    """Parse SMILES into a kekulized :class:`MolGraph`.

    Errors carry 1-based character positions.
    """
    if not text or not text.strip():
        raise SmilesError("empty SMILES")
    if not text.isascii():
        raise SmilesError("non-ASCII input")
    text = text.strip()
    atoms = []
    bonds = {}  # (i, j) -> order code
    prev = None
    stack = []
    pending = None
    pending_pos = None
    rings = {}
    i = 0

    def add_bond(a, b, order, pos):
        key = (min(a, b), max(a, b))
        if a == b or key in bonds:
            raise SmilesError("duplicate or self bond", pos)
        if order is None:
            order = AROMATIC if atoms[a].aromatic and atoms[b].aromatic else SINGLE
        bonds[key] = order

    while i < len(text):
        ch = text[i]
        pos = i + 1
        if ch == "(":
            if prev is None:
                raise SmilesError("branch without preceding atom", pos)
            stack.append(prev)
            i += 1
        elif ch == ")":
            if not stack:
                raise SmilesError("unmatched ')'", pos)
            if pending is not None:
                raise SmilesError("dangling bond", pending_pos)
            prev = stack.pop()
            i += 1
        elif ch in BOND_SYMBOLS:
            if pending is not None or prev is None:
                raise SmilesError("misplaced bond symbol", pos)
            pending, pending_pos = BOND_SYMBOLS[ch], pos
            i += 1
        elif ch == ".":
            if pending is not None or stack:
                raise SmilesError("misplaced '.'", pos)
            prev = None
            i += 1
        elif ch.isdigit() or ch == "%":
            if prev is None:
                raise SmilesError("ring closure without atom", pos)
            if ch == "%":
                num = text[i + 1:i + 3]
                if len(num) != 2 or not num.isdigit():
                    raise SmilesError("bad '%' ring label", pos)
                label = int(num)
                i += 3
            else:
                label = int(ch)
                i += 1
            if label in rings:
                other, order, _ = rings.pop(label)
                if order is not None and pending is not None and order != pending:
                    raise SmilesError("conflicting ring-closure bond orders", pos)
                add_bond(other, prev, pending if pending is not None else order, pos)
            else:
                rings[label] = (prev, pending, pos)
            pending = None
        else:
            if ch == "[":
                raw, i = _parse_bracket(text, i)
            else:
                sym = None
                for cand in ORGANIC + AROMATIC_ORGANIC:
                    if text.startswith(cand, i):
                        sym = cand
                        break
                if sym is None:
                    if ch.isalpha():
                        raise SmilesError("unsupported element", pos)
                    raise SmilesError(f"unexpected character {ch!r}", pos)
                aromatic = sym.islower()
                raw = _RawAtom(sym.capitalize() if aromatic else sym, 0, aromatic, None, pos)
                i += len(sym)
            atoms.append(raw)
            idx = len(atoms) - 1
            if prev is not None:
                add_bond(prev, idx, pending, pos)
            elif pending is not None:
                raise SmilesError("bond without preceding atom", pending_pos)
            pending = None
            prev = idx
    if pending is not None:
        raise SmilesError("dangling bond", pending_pos)
    if stack:
        raise SmilesError("unclosed branch", len(text))
    if rings:
        label, (_, _, pos) = next(iter(rings.items()))
        raise SmilesError(f"unmatched ring-closure digit {label}", pos)
    if not atoms:
        raise SmilesError("no atoms")
    return _build(atoms, bonds)


def _build(raw_atoms, bonds):
    n = len(raw_atoms)
    used = [0] * n
    has_arom = [False] * n
    for (a, b), order in bonds.items():
        w = 1 if order == AROMATIC else order
        used[a] += w
        used[b] += w
        if order == AROMATIC:
            has_arom[a] = has_arom[b] = True
    needs_pi = set()
    hydrogens = []
    for k, ra in enumerate(raw_atoms):
        arom = ra.aromatic or has_arom[k]
        if ra.explicit_h is None:
            v = fill_valence(ra.element, 0, used[k])
            if v is None:
                raise ValenceError(f"valence exceeded for {ra.element} at position {ra.pos}")
            spare = v - used[k]
            if arom and spare >= 1:
                needs_pi.add(k)
                hydrogens.append(spare - 1)
            else:
                hydrogens.append(0 if arom else spare)
        else:
            h = ra.explicit_h
            if arom:
                v = fill_valence(ra.element, ra.charge, used[k] + h)
                if v is None:
                    raise ValenceError(f"valence exceeded for {ra.element} at position {ra.pos}")
                if v - used[k] - h >= 1:
                    needs_pi.add(k)
            hydrogens.append(h)
    arom_edges = [e for e, o in bonds.items() if o == AROMATIC]
    doubles = kekulize(n, arom_edges, needs_pi)
    atoms = [Atom(ra.element, ra.charge, False, h) for ra, h in zip(raw_atoms, hydrogens)]
    out_bonds = []
    for (a, b), order in bonds.items():
        if order == AROMATIC:
            order = DOUBLE if (a, b) in doubles else SINGLE
        out_bonds.append(Bond(a, b, order))
    return MolGraph(atoms, out_bonds)


def _aromatic_used(m, i):
    return sum(1 if k in m.aromatic_bonds else m.bonds[k].order for _, k in m.neighbors(i))


def _has_aromatic_double(m, i):
    return any(k in m.aromatic_bonds and m.bonds[k].order == DOUBLE for _, k in m.neighbors(i))


def atom_token(m, i):
    a = m.atoms[i]
    sym = a.element.lower() if a.is_aromatic else a.element
    if a.is_aromatic and sym not in AROMATIC_ORGANIC:
        raise MoleculeError(f"cannot write aromatic {a.element}")
    s = _aromatic_used(m, i)
    np_actual = _has_aromatic_double(m, i)
    if a.formal_charge == 0 and a.element in ORGANIC:
        v = fill_valence(a.element, 0, s)
        if v is not None:
            spare = v - s
            if a.is_aromatic:
                if (spare >= 1) == np_actual and (spare - 1 if np_actual else 0) == a.implicit_h:
                    return sym
            elif spare == a.implicit_h:
                return sym
    if a.is_aromatic:
        v = fill_valence(a.element, a.formal_charge, s + a.implicit_h)
        if v is None or (v - s - a.implicit_h >= 1) != np_actual:
            raise MoleculeError(f"atom {i} has no consistent aromatic bracket form")
    tok = "[" + sym
    if a.implicit_h == 1:
        tok += "H"
    elif a.implicit_h > 1:
        tok += f"H{a.implicit_h}"
    q = a.formal_charge
    if q:
        tok += ("+" if q > 0 else "-") + (str(abs(q)) if abs(q) > 1 else "")
    return tok + "]"


def bond_token(m, k):
    if k in m.aromatic_bonds:
        return ""
    b = m.bonds[k]
    if b.order == SINGLE:
        both = m.atoms[b.begin].is_aromatic and m.atoms[b.end].is_aromatic
        return "-" if both else ""
    return _SYMBOL_FOR_ORDER[b.order]


def write_smiles(m, ranks):
    """Write ``m`` by depth-first traversal led by ``ranks`` (lower first).

    Returns ``(smiles, atom_order)`` where ``atom_order`` lists atom indices
    in the order they appear in the string.
    """
    n = m.n_atoms
    if n == 0:
        raise MoleculeError("empty molecule")
    if m.n_components() != 1:
        raise MoleculeError("molecule is disconnected")
    start = min(range(n), key=lambda i: ranks[i])
    visit = {}
    children = {i: [] for i in range(n)}
    ring_items = {i: [] for i in range(n)}
    closure_bonds = set()

    def dfs(u, parent_bond):
        visit[u] = len(visit)
        for v, k in sorted(m.neighbors(u), key=lambda t: ranks[t[0]]):
            if k == parent_bond:
                continue
            if v in visit:
                if k not in closure_bonds:
                    closure_bonds.add(k)
                    ring_items[u].append((v, k))
                    ring_items[v].append((u, k))
            else:
                children[u].append((v, k))
                dfs(v, k)

    dfs(start, None)
    out = []
    open_digits = {}
    free = list(range(1, 100))

    def digit(d):
        return str(d) if d < 10 else f"%{d}"

    def emit(u):
        out.append(atom_token(m, u))
        for v, k in sorted(ring_items[u], key=lambda t: visit[t[0]]):
            if visit[v] < visit[u]:
                d = open_digits.pop(k)
                out.append(digit(d))
                free.append(d)
                free.sort()
            else:
                d = free.pop(0)
                open_digits[k] = d
                out.append(bond_token(m, k) + digit(d))
        kids = children[u]
        for idx, (v, k) in enumerate(kids):
            branch = idx < len(kids) - 1
            if branch:
                out.append("(")
            out.append(bond_token(m, k))
            emit(v)
            if branch:
                out.append(")")

    emit(start)
    order = sorted(visit, key=visit.get)
    return "".join(out), order
