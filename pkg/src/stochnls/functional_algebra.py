"""Polynomial functional-valued distributions in the fields Phi and Phi-bar.

An expression is a finite formal sum of monomials.  Each monomial carries an
exact rational coefficient, a power of the coupling constant lambda, and a
tuple of *slots*.  A slot is the multiset of atoms sitting at one external
base point; ordinary single-point functionals have exactly one slot, the
multilocal objects produced by the bullet product have several.

Atoms
-----
``FieldLeg(bar)``
    an undifferentiated occurrence of Phi (``bar=False``) or Phi-bar.
``CoeffToken(name)``
    a smooth multiplier: the coinciding-point kernels ``C``/``Cbar``, their
    counterterm shifts ``DeltaC``/``DeltaCbar``, the cut-off ``Chi`` and the
    background configurations ``Eta``/``EtaBar``.
``Conv(bar, arg)``
    ``G (*) arg`` (or ``Gbar (*) arg``); ``arg`` is itself a tuple of atoms
    living at a new integration vertex.
``Link(end, label)``
    one endpoint of a covariance edge ``Q(a, b)``.  ``end == 0`` marks the
    vertex ``a`` that carried the contracted Phi, ``end == 1`` the vertex
    ``b`` that carried Phi-bar.  ``Qbar(a, b) == Q(b, a)``, so a single edge
    kind is enough at this level.
``Operand()``
    the argument slot of a linear operator (used for counterterms).

Convolution is linear, so ``Conv`` arguments are always kept expanded into
single monomials; the scalar part of the argument is pulled out front.

Example
-------
>>> phi, phibar = make_generator("Phi"), make_generator("PhiBar")
>>> f1 = convolve(False, phibar * phi * phi)
>>> print(f1)
G⊛(Φ̄Φ²)
>>> f1.grading
(2, 1, 1, 0)
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Iterator, Mapping, Union

TOKEN_NAMES = ("C", "Cbar", "Chi", "Eta", "EtaBar", "DeltaC", "DeltaCbar")

# Coinciding-point tokens: their bar is fixed by the enclosing convolution.
_KERNEL_TOKENS = {"C": ("C", "Cbar"), "Cbar": ("C", "Cbar"),
                  "DeltaC": ("DeltaC", "DeltaCbar"), "DeltaCbar": ("DeltaC", "DeltaCbar")}
_TOKEN_CONJ = {"C": "Cbar", "Cbar": "C", "Eta": "EtaBar", "EtaBar": "Eta",
               "DeltaC": "DeltaCbar", "DeltaCbar": "DeltaC", "Chi": "Chi"}
_ETA_TOKENS = frozenset({"Eta", "EtaBar"})

# Labelled permutations tried during canonicalisation before giving up.
MAX_LABELINGS = 200_000


class AlgebraError(ValueError):
    pass


@dataclass(frozen=True)
class FieldLeg:
    bar: bool = False


@dataclass(frozen=True)
class CoeffToken:
    name: str

    def __post_init__(self):
        if self.name not in TOKEN_NAMES:
            raise AlgebraError(f"unknown coefficient token {self.name!r}")


@dataclass(frozen=True)
class Conv:
    bar: bool
    arg: tuple


@dataclass(frozen=True)
class Link:
    end: int
    label: int


@dataclass(frozen=True)
class Operand:
    pass


Atom = Union[FieldLeg, CoeffToken, Conv, Link, Operand]


# ---------------------------------------------------------------------------
# ordering keys


def _shape(atom) -> tuple:
    """Total-order key that ignores link labels."""
    if isinstance(atom, FieldLeg):
        return (0, int(atom.bar))
    if isinstance(atom, CoeffToken):
        return (1, atom.name)
    if isinstance(atom, Link):
        return (2, atom.end)
    if isinstance(atom, Operand):
        return (3,)
    return (4, int(atom.bar), tuple(sorted(_shape(a) for a in atom.arg)))


def atom_key(atom) -> tuple:
    """Total-order key used for the canonical sorted order of atoms."""
    if isinstance(atom, FieldLeg):
        return (0, int(atom.bar))
    if isinstance(atom, CoeffToken):
        return (1, atom.name)
    if isinstance(atom, Link):
        return (2, atom.end, atom.label)
    if isinstance(atom, Operand):
        return (3,)
    return (4, int(atom.bar), tuple(atom_key(a) for a in atom.arg))


def _sort_atoms(atoms) -> tuple:
    out = []
    for a in atoms:
        if isinstance(a, Conv):
            a = Conv(a.bar, _sort_atoms(a.arg))
        out.append(a)
    out.sort(key=atom_key)
    return tuple(out)


# ---------------------------------------------------------------------------
# traversal helpers


def iter_atoms(atoms, depth: int = 0) -> Iterator[tuple]:
    """Yield ``(atom, depth)`` for every atom of a tree, preorder."""
    for a in atoms:
        yield a, depth
        if isinstance(a, Conv):
            yield from iter_atoms(a.arg, depth + 1)


def _map_atoms(atoms, fn) -> tuple:
    out = []
    for a in atoms:
        if isinstance(a, Conv):
            a = Conv(a.bar, _map_atoms(a.arg, fn))
        out.append(fn(a))
    return tuple(out)


def _links_in(slots) -> set:
    return {a.label for atoms in slots for a, _ in iter_atoms(atoms) if isinstance(a, Link)}


def _relabel(atoms, mapping: Mapping[int, int]) -> tuple:
    return _map_atoms(atoms, lambda a: Link(a.end, mapping[a.label]) if isinstance(a, Link) else a)


def shift_links(slots: tuple, offset: int) -> tuple:
    if not offset:
        return slots
    return tuple(_map_atoms(s, lambda a: Link(a.end, a.label + offset) if isinstance(a, Link) else a)
                 for s in slots)


def max_link(slots) -> int:
    labels = _links_in(slots)
    return max(labels) if labels else 0


def _fix_tokens(atoms, bar_context: bool) -> tuple:
    out = []
    for a in atoms:
        if isinstance(a, CoeffToken) and a.name in _KERNEL_TOKENS:
            plain, barred = _KERNEL_TOKENS[a.name]
            a = CoeffToken(plain if bar_context else barred)
        elif isinstance(a, Conv):
            a = Conv(a.bar, _fix_tokens(a.arg, a.bar))
        out.append(a)
    return tuple(out)


def _validate_links(slots):
    ends = {}
    for atoms in slots:
        for a, _ in iter_atoms(atoms):
            if isinstance(a, Link):
                ends.setdefault(a.label, []).append(a.end)
    for label, e in ends.items():
        if sorted(e) != [0, 1]:
            raise AlgebraError(f"covariance edge {label} has endpoints {sorted(e)}; expected one of each kind")


def _link_signatures(slots) -> dict:
    sig = {}

    def walk(atoms, slot, path):
        for a in atoms:
            if isinstance(a, Link):
                sig.setdefault(a.label, [None, None])[a.end] = (slot, path, tuple(sorted(_shape(b) for b in atoms)))
            elif isinstance(a, Conv):
                walk(a.arg, slot, path + (_shape(a),))

    for i, atoms in enumerate(slots):
        walk(atoms, i, ())
    return {k: tuple(v) for k, v in sig.items()}


@lru_cache(maxsize=200_000)
def canonical_slots(slots: tuple) -> tuple:
    """Canonical representative of a tuple of slots.

    Coinciding-point tokens take their bar from the enclosing convolution
    (``Cbar`` at a root or under ``G``, ``C`` under ``Gbar``); the two are
    the same real kernel.  Link labels are chosen to minimise the sorted
    encoding, searching only over labels that share an endpoint signature.
    """
    slots = tuple(_fix_tokens(s, False) for s in slots)
    labels = _links_in(slots)
    if not labels:
        return tuple(_sort_atoms(s) for s in slots)
    _validate_links(slots)
    sig = _link_signatures(slots)
    groups = {}
    for lab in labels:
        groups.setdefault(sig[lab], []).append(lab)
    ordered = [groups[k] for k in sorted(groups)]
    n_tries = 1
    for g in ordered:
        for i in range(2, len(g) + 1):
            n_tries *= i
    if n_tries > MAX_LABELINGS:
        raise AlgebraError(f"too many symmetric covariance edges to canonicalise ({n_tries} labelings)")
    best = None
    for perms in itertools.product(*(itertools.permutations(g) for g in ordered)):
        mapping = {}
        nxt = 1
        for perm in perms:
            for lab in perm:
                mapping[lab] = nxt
                nxt += 1
        cand = tuple(_sort_atoms(_relabel(s, mapping)) for s in slots)
        key = tuple(tuple(atom_key(a) for a in s) for s in cand)
        if best is None or key < best[0]:
            best = (key, cand)
    return best[1]


# ---------------------------------------------------------------------------
# expressions


class Expr:
    """Formal sum of monomials over a fixed number of slots.

    Keys are ``(lambda_power, slots)``, values nonzero ``Fraction``.
    Instances are immutable once built; arithmetic returns new objects.
    """

    __slots__ = ("_terms", "_hash", "nslots")

    def __init__(self, terms: Mapping | None = None, nslots: int = 1, *, _canonical: bool = False):
        self.nslots = nslots
        acc: dict = {}
        for (lam, slots), c in (terms or {}).items():
            if len(slots) != nslots:
                raise AlgebraError(f"monomial has {len(slots)} slots, expected {nslots}")
            if lam < 0:
                raise AlgebraError("lambda power must be nonnegative")
            c = Fraction(c)
            if not c:
                continue
            key = (lam, slots if _canonical else canonical_slots(tuple(tuple(s) for s in slots)))
            acc[key] = acc.get(key, 0) + c
        self._terms = {k: v for k, v in sorted(acc.items(), key=_term_sort_key) if v}
        self._hash = None

    # -- container protocol
    def items(self):
        return self._terms.items()

    def __iter__(self):
        return iter(self.monomials())

    def __len__(self):
        return len(self._terms)

    def __bool__(self):
        return bool(self._terms)

    def __eq__(self, other):
        if isinstance(other, (int, Fraction)) and other == 0:
            return not self._terms
        if not isinstance(other, Expr):
            return NotImplemented
        return self.nslots == other.nslots and self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.nslots, tuple(self._terms.items())))
        return self._hash

    def monomials(self) -> list:
        return [Monomial(c, lam, slots) for (lam, slots), c in self._terms.items()]

    # -- arithmetic
    def __add__(self, other):
        other = _coerce(other, self.nslots)
        acc = dict(self._terms)
        for k, v in other._terms.items():
            acc[k] = acc.get(k, 0) + v
        return Expr(acc, self.nslots, _canonical=True)

    __radd__ = __add__

    def __neg__(self):
        return Expr({k: -v for k, v in self._terms.items()}, self.nslots, _canonical=True)

    def __sub__(self, other):
        return self + (-_coerce(other, self.nslots))

    def __rsub__(self, other):
        return _coerce(other, self.nslots) - self

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        return multiply(self, other)

    def __rmul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        return multiply(other, self)

    def scale(self, c, lam: int = 0):
        c = Fraction(c)
        return Expr({(l + lam, s): v * c for (l, s), v in self._terms.items()}, self.nslots, _canonical=True)

    # -- bookkeeping
    @property
    def grading(self) -> tuple:
        g = (0, 0, 0, 0)
        for m in self.monomials():
            g = tuple(max(x, y) for x, y in zip(g, m.grading))
        return g

    @property
    def depth(self) -> int:
        return max((m.depth for m in self.monomials()), default=0)

    def truncate(self, order: int):
        return Expr({k: v for k, v in self._terms.items() if k[0] <= order}, self.nslots, _canonical=True)

    def at_order(self, order: int, strip: bool = True):
        """Coefficient of lambda**order (with the power removed if ``strip``)."""
        return Expr({((0 if strip else l), s): v for (l, s), v in self._terms.items() if l == order},
                    self.nslots, _canonical=True)

    def max_order(self) -> int:
        return max((l for l, _ in self._terms), default=0)

    def __repr__(self):
        return f"Expr({pretty(self, unicode=False)!r})"

    def __str__(self):
        return pretty(self)


@dataclass(frozen=True)
class Monomial:
    coeff: Fraction
    lambda_power: int
    slots: tuple

    @property
    def atoms(self) -> tuple:
        if len(self.slots) != 1:
            raise AlgebraError("atoms is only defined for single-slot monomials")
        return self.slots[0]

    @property
    def grading(self) -> tuple:
        m = mb = l = lb = 0
        for atoms in self.slots:
            for a, _ in iter_atoms(atoms):
                if isinstance(a, FieldLeg):
                    if a.bar:
                        mb += 1
                    else:
                        m += 1
                elif isinstance(a, Conv):
                    if a.bar:
                        lb += 1
                    else:
                        l += 1
        return (m, mb, l, lb)

    @property
    def depth(self) -> int:
        return max((d + 1 for atoms in self.slots for a, d in iter_atoms(atoms) if isinstance(a, Conv)),
                   default=0)

    def as_expr(self) -> Expr:
        return Expr({(self.lambda_power, self.slots): self.coeff}, len(self.slots))


def _term_sort_key(item):
    (lam, slots), _ = item
    return (lam, tuple(tuple(atom_key(a) for a in s) for s in slots))


def _coerce(x, nslots: int) -> Expr:
    if isinstance(x, Expr):
        if x.nslots != nslots:
            raise AlgebraError(f"cannot combine {x.nslots}-slot and {nslots}-slot expressions")
        return x
    if isinstance(x, (int, Fraction)):
        return Expr({(0, ((),) * nslots): x}, nslots)
    raise TypeError(f"cannot interpret {type(x).__name__} as an expression")


FunctionalExpr = Expr

ZERO = Expr()


# ---------------------------------------------------------------------------
# constructors and operations


def make_generator(kind: str) -> Expr:
    """Return the unit ``One``, ``Phi`` or ``PhiBar``."""
    if kind == "One":
        return Expr({(0, ((),)): 1})
    if kind == "Phi":
        return Expr({(0, ((FieldLeg(False),),)): 1})
    if kind == "PhiBar":
        return Expr({(0, ((FieldLeg(True),),)): 1})
    raise AlgebraError(f"unknown generator {kind!r}; expected One, Phi or PhiBar")


def token(name: str) -> Expr:
    return Expr({(0, ((CoeffToken(name),),)): 1})


def lam(power: int = 1) -> Expr:
    """The coupling constant raised to ``power`` as a scalar expression."""
    return Expr({(power, ((),)): 1})


def operand() -> Expr:
    return Expr({(0, ((Operand(),),)): 1})


def _mul_slots(s1: tuple, s2: tuple) -> tuple:
    off = max_link(s1)
    s2 = shift_links(s2, off)
    return tuple(a + b for a, b in zip(s1, s2))


def multiply(a: Expr, b: Expr) -> Expr:
    """Pointwise product, slot by slot."""
    if a.nslots != b.nslots:
        raise AlgebraError("pointwise product needs matching slot counts")
    acc: dict = {}
    for (la, sa), ca in a.items():
        for (lb, sb), cb in b.items():
            key = (la + lb, _mul_slots(sa, sb))
            acc[key] = acc.get(key, 0) + ca * cb
    return Expr(acc, a.nslots)


def tensor(a: Expr, b: Expr) -> Expr:
    """Tensor product: the slots of ``b`` are appended after those of ``a``."""
    acc: dict = {}
    for (la, sa), ca in a.items():
        for (lb, sb), cb in b.items():
            sb2 = shift_links(sb, max_link(sa))
            key = (la + lb, sa + sb2)
            acc[key] = acc.get(key, 0) + ca * cb
    return Expr(acc, a.nslots + b.nslots)


def power(a: Expr, n: int) -> Expr:
    out = make_generator("One") if a.nslots == 1 else _coerce(1, a.nslots)
    for _ in range(n):
        out = multiply(out, a)
    return out


def _conj_atom(a):
    if isinstance(a, FieldLeg):
        return FieldLeg(not a.bar)
    if isinstance(a, CoeffToken):
        return CoeffToken(_TOKEN_CONJ[a.name])
    if isinstance(a, Link):
        return Link(1 - a.end, a.label)
    return a


def conjugate(a: Expr) -> Expr:
    """Complex conjugation: swaps Phi/Phi-bar, G/G-bar, C/C-bar, Eta/EtaBar.

    Coefficients are rational, hence real, so they are left untouched.
    """
    def conj_atoms(atoms):
        out = []
        for x in atoms:
            if isinstance(x, Conv):
                x = Conv(not x.bar, conj_atoms(x.arg))
            else:
                x = _conj_atom(x)
            out.append(x)
        return tuple(out)

    return Expr({(l, tuple(conj_atoms(s) for s in slots)): c for (l, slots), c in a.items()}, a.nslots)


def convolve(bar: bool, a: Expr) -> Expr:
    """Wrap ``a`` in ``G (*)`` (or ``Gbar (*)``); linear in ``a``."""
    if a.nslots != 1:
        raise AlgebraError("convolution acts on single-slot expressions")
    return Expr({(l, ((Conv(bool(bar), slots[0]),),)): c for (l, slots), c in a.items()})


def leg_count(m) -> tuple:
    """``(phi_legs, phibar_legs)`` at the top level of a single-slot monomial."""
    atoms = m.atoms if isinstance(m, Monomial) else tuple(m)
    phi = sum(1 for a in atoms if isinstance(a, FieldLeg) and not a.bar)
    phibar = sum(1 for a in atoms if isinstance(a, FieldLeg) and a.bar)
    return phi, phibar


def total_leg_count(m: Monomial) -> tuple:
    """Leg counts through every nesting level and every slot."""
    g = m.grading
    return g[0], g[1]


def _has_eta_or_leg(atoms) -> bool:
    for a, _ in iter_atoms(atoms):
        if isinstance(a, FieldLeg):
            return True
        if isinstance(a, CoeffToken) and a.name in _ETA_TOKENS:
            return True
    return False


def evaluate_at_zero(a: Expr) -> Expr:
    """Set the background configurations to zero.

    Every monomial with a field leg or an Eta token anywhere (also inside a
    convolution) vanishes; what is left is a pure kernel expression.
    """
    keep = {k: v for k, v in a.items() if not any(_has_eta_or_leg(s) for s in k[1])}
    return Expr(keep, a.nslots, _canonical=True)


def has_operand(a: Expr) -> bool:
    return any(isinstance(x, Operand) for (_, slots), _ in a.items() for s in slots for x, _ in iter_atoms(s))


def substitute_operand(op: Expr, arg: Expr) -> Expr:
    """Apply a linear operator (an expression with one Operand per monomial)."""
    if op.nslots != 1 or arg.nslots != 1:
        raise AlgebraError("operators act on single-slot expressions")
    acc: dict = {}
    for (lo, so), co in op.items():
        for (la, sa), ca in arg.items():
            inner = shift_links(sa, max_link(so))[0]
            state = {"done": 0}

            def put(atoms):
                out = []
                for x in atoms:
                    if isinstance(x, Operand):
                        state["done"] += 1
                        out.extend(inner)
                        continue
                    if isinstance(x, Conv):
                        x = Conv(x.bar, put(x.arg))
                    out.append(x)
                return tuple(out)

            new = put(so[0])
            if state["done"] != 1:
                raise AlgebraError(f"operator monomial has {state['done']} operand slots, expected 1")
            key = (lo + la, (new,))
            acc[key] = acc.get(key, 0) + co * ca
    return Expr(acc)


# ---------------------------------------------------------------------------
# serialisation


def atom_to_json(a) -> dict:
    if isinstance(a, FieldLeg):
        return {"type": "leg", "bar": a.bar}
    if isinstance(a, CoeffToken):
        return {"type": "token", "name": a.name}
    if isinstance(a, Link):
        return {"type": "link", "end": a.end, "label": a.label}
    if isinstance(a, Operand):
        return {"type": "operand"}
    return {"type": "conv", "bar": a.bar, "arg": [atom_to_json(x) for x in a.arg]}


def atom_from_json(d: Mapping):
    kind = d.get("type")
    if kind == "leg":
        return FieldLeg(bool(d["bar"]))
    if kind == "token":
        return CoeffToken(d["name"])
    if kind == "link":
        return Link(int(d["end"]), int(d["label"]))
    if kind == "operand":
        return Operand()
    if kind == "conv":
        return Conv(bool(d["bar"]), tuple(atom_from_json(x) for x in d["arg"]))
    raise AlgebraError(f"unknown atom type {kind!r}")


def to_json(a: Expr) -> list:
    """JSON-ready list of monomials.

    Single-slot expressions use ``atoms``; multilocal ones use ``slots``.
    """
    out = []
    for m in a.monomials():
        d = {"coeff": [m.coeff.numerator, m.coeff.denominator], "lambda": m.lambda_power}
        if a.nslots == 1:
            d["atoms"] = [atom_to_json(x) for x in m.slots[0]]
        else:
            d["slots"] = [[atom_to_json(x) for x in s] for s in m.slots]
        out.append(d)
    return out


def from_json(data: Iterable[Mapping], nslots: int | None = None) -> Expr:
    terms: dict = {}
    data = list(data)
    for d in data:
        if "atoms" in d:
            slots = (tuple(atom_from_json(x) for x in d["atoms"]),)
        else:
            slots = tuple(tuple(atom_from_json(x) for x in s) for s in d["slots"])
        if nslots is None:
            nslots = len(slots)
        num, den = d["coeff"]
        key = (int(d["lambda"]), slots)
        terms[key] = terms.get(key, 0) + Fraction(num, den)
    return Expr(terms, nslots or 1)


# ---------------------------------------------------------------------------
# pretty printing

_SUPERSCRIPT = str.maketrans("0123456789", "⁰¹²³⁴⁵⁶⁷⁸⁹")
_UNICODE_NAMES = {"C": "C", "Cbar": "C̄", "Chi": "χ", "Eta": "η", "EtaBar": "η̄",
                  "DeltaC": "δC", "DeltaCbar": "δC̄"}


def _power(sym: str, n: int, unicode: bool) -> str:
    if n == 1:
        return sym
    return sym + (str(n).translate(_SUPERSCRIPT) if unicode else f"^{n}")


def _fmt_atoms(atoms, unicode: bool) -> str:
    tokens: dict = {}
    legs = [0, 0]
    rest = []
    for a in atoms:
        if isinstance(a, FieldLeg):
            legs[int(a.bar)] += 1
        elif isinstance(a, CoeffToken):
            tokens[a.name] = tokens.get(a.name, 0) + 1
        elif isinstance(a, Link):
            rest.append((f"Q{a.label}>" if a.end == 0 else f">Q{a.label}"))
        elif isinstance(a, Operand):
            rest.append("[·]" if unicode else "[.]")
        else:
            g = ("Ḡ⊛" if a.bar else "G⊛") if unicode else ("Gbar*" if a.bar else "G*")
            rest.append(f"{g}({_fmt_atoms(a.arg, unicode) or '1'})")
    parts = []
    for name in TOKEN_NAMES:
        if name in tokens:
            parts.append(_power(_UNICODE_NAMES[name] if unicode else name, tokens[name], unicode))
    if legs[1]:
        parts.append(_power("Φ̄" if unicode else "Phibar", legs[1], unicode))
    if legs[0]:
        parts.append(_power("Φ" if unicode else "Phi", legs[0], unicode))
    parts.extend(rest)
    return ("" if unicode else " ").join(parts)


def pretty(a: Expr, unicode: bool = True) -> str:
    """Human-readable form using G⊛, Φ̄, C̄ notation.

    Covariance edges print as ``Qn>`` at the Phi end and ``>Qn`` at the
    Phi-bar end.
    """
    if not a:
        return "0"
    pieces = []
    for m in a.monomials():
        body = (" ⊗ " if unicode else " (x) ").join(_fmt_atoms(s, unicode) or "1" for s in m.slots)
        c = m.coeff
        mag = abs(c)
        pre = "" if mag == 1 else (f"{mag}" if mag.denominator == 1 else f"({mag})")
        if m.lambda_power:
            lam_s = _power("λ" if unicode else "lambda", m.lambda_power, unicode)
            pre = f"{pre}{lam_s}" if unicode else (f"{pre} {lam_s}" if pre else lam_s)
        if pre and body != "1":
            text = f"{pre}{body}" if unicode else f"{pre} {body}"
        elif pre:
            text = pre
        else:
            text = body
        pieces.append(("- " if c < 0 else "+ ") + text)
    s = " ".join(pieces)
    return s[2:] if s.startswith("+ ") else "-" + s[1:]
