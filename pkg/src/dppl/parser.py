"""Surface syntax: lexer, recursive-descent parser and desugaring.

Grammar (whitespace-insensitive, ``#`` starts a line comment)::

    expr   := term {";" term}                      # t1; t2 = let _ = t1 in t2
    term   := "lam" binder ":" type "." expr
            | "let" binder [":" type] "=" expr "in" expr
            | "if" expr "then" expr "else" expr
            | arith
    arith  := mul {("+" | "-") mul}
    mul    := app {("*" | "/") app}
    app    := head {aterm}
    head   := "assume" aterm | "weight" aterm | "infer" aterm
            | ("diffA" | "diffP" | "diff1A" | "diff1P") aterm aterm
            | "solve" aterm aterm aterm
            | "observe" aterm "from" dist
            | "unroll" nat aterm
            | aterm
    aterm  := ident | number | "-" number | "(" [expr {"," expr}] ")"
            | aterm "." nat | prim "(" expr {"," expr} ")" | dist
    binder := ident | "(" binder {"," binder} ")"
    prim   := "sin" | "cos" | "pdfGaussian" | "pdfBeta" | "wiener"
    dist   := "Gaussian" "(" expr "," expr ")" | "Beta" "(" expr "," expr ")"
            | "Wiener" "(" ")"
    type   := btype ["->det" type | "->rnd" type]
    btype  := "RealA" | "RealP" | "RealN" | "Dist" btype | "(" [type {"," type}] ")"

The first argument of ``wiener`` must be a numeric literal in [0, 1]: it
selects the realization.  Tuple binders expand to nested lets over
projections of a fresh variable.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from dppl.ast import (
    UNIT_TERM, Abs, App, Arrow, Assume, Coeffect, Diff, DistCon, DistT,
    Effect, If, Infer, Prim, PrimApp, PrimDist, Proj, Real, RealLit, Solve,
    Term, Var, Weight, WienerFn, let, subst, tuple_term, tuple_type,
)

KEYWORDS = {
    "lam", "let", "in", "if", "then", "else", "assume", "weight", "infer",
    "diffA", "diffP", "diff1A", "diff1P", "solve", "observe", "from", "unroll",
    "sin", "cos", "pdfGaussian", "pdfBeta", "wiener", "Gaussian", "Beta",
    "Wiener", "RealA", "RealP", "RealN", "Dist",
}

_PRIMS = {"sin": Prim.SIN, "cos": Prim.COS, "pdfGaussian": Prim.PDF_GAUSSIAN,
          "pdfBeta": Prim.PDF_BETA}
_DISTS = {"Gaussian": PrimDist.GAUSSIAN, "Beta": PrimDist.BETA,
          "Wiener": PrimDist.WIENER}
_PDF_OF = {PrimDist.GAUSSIAN: Prim.PDF_GAUSSIAN, PrimDist.BETA: Prim.PDF_BETA}

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*)
  | (?P<arrow>->det|->rnd)
  | (?P<num>[0-9]+(?:\.[0-9]+)?(?:[eE][+-]?[0-9]+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<sym>[(),.:=+\-*/;])
""", re.VERBOSE)


@dataclass(frozen=True)
class SourceProgram:
    text: str
    filename: str = "<input>"


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    message: str
    line: int
    column: int
    filename: str = "<input>"

    def __str__(self):
        return f"{self.filename}:{self.line}:{self.column}: {self.severity}: {self.message}"


class ParseError(Exception):
    def __init__(self, diagnostic: Diagnostic):
        super().__init__(str(diagnostic))
        self.diagnostic = diagnostic


@dataclass(frozen=True)
class Token:
    kind: str      # num, ident, kw, sym, arrow, eof
    text: str
    line: int
    col: int


def tokenize(text: str, filename: str = "<input>") -> list[Token]:
    toks = []
    pos, line, line_start = 0, 1, 0
    last_end = -1
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(Diagnostic("error", f"unexpected character {text[pos]!r}",
                                        line, pos - line_start + 1, filename))
        kind = m.lastgroup
        s = m.group()
        if kind == "num" and toks and toks[-1].text == "." and toks[-1].kind == "sym" \
                and last_end == pos:
            # projection index (written right after the dot): only the
            # leading digits belong to this token
            s = re.match(r"[0-9]+", s).group()
        if kind != "ws":
            if kind == "ident" and s in KEYWORDS:
                kind = "kw"
            toks.append(Token(kind, s, line, pos - line_start + 1))
            last_end = pos + len(s)
        for i, ch in enumerate(s):
            if ch == "\n":
                line += 1
                line_start = pos + i + 1
        pos += len(s)
    toks.append(Token("eof", "", line, pos - line_start + 1))
    return toks


class Parser:
    def __init__(self, src: SourceProgram):
        self.src = src
        self.toks = tokenize(src.text, src.filename)
        self.i = 0
        self._idents = {t.text for t in self.toks if t.kind == "ident"}
        self._counter = 0
        # id(term) -> (line, column) of the token that starts it
        self.positions: dict = {}
        self._alive: list = []

    # -- token helpers ------------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def error(self, msg, tok=None):
        tok = tok or self.tok
        raise ParseError(Diagnostic("error", msg, tok.line, tok.col, self.src.filename))

    def at(self, text) -> bool:
        return self.tok.text == text and self.tok.kind in ("kw", "sym", "arrow")

    def expect(self, text) -> Token:
        if not self.at(text):
            found = self.tok.text or "end of input"
            self.error(f"expected {text!r}, found {found!r}")
        tok = self.tok
        self.i += 1
        return tok

    def ident(self) -> str:
        if self.tok.kind != "ident":
            self.error(f"expected identifier, found {self.tok.text or 'end of input'!r}")
        name = self.tok.text
        self.i += 1
        return name

    def mark(self, t, tok):
        if id(t) not in self.positions:
            self.positions[id(t)] = (tok.line, tok.col)
            self._alive.append(t)
        return t

    def fresh(self) -> str:
        while True:
            name = f"__tup{self._counter}"
            self._counter += 1
            if name not in self._idents:
                return name

    # -- entry --------------------------------------------------------------

    def program(self) -> Term:
        t = self.expr()
        if self.tok.kind != "eof":
            self.error(f"unexpected {self.tok.text!r} after end of term")
        return t

    def expr(self) -> Term:
        t = self.term()
        if self.at(";"):
            self.i += 1
            rest = self.expr()
            return let("_", t, rest)
        return t

    def term(self) -> Term:
        tok = self.tok
        return self.mark(self._term(), tok)

    def _term(self) -> Term:
        if self.at("lam"):
            self.i += 1
            binder = self.binder()
            self.expect(":")
            ty = self.type_()
            self.expect(".")
            body = self.expr()
            return self.lam(binder, ty, body)
        if self.at("let"):
            self.i += 1
            binder = self.binder()
            ty = None
            if self.at(":"):
                self.i += 1
                ty = self.type_()
            self.expect("=")
            bound = self.expr()
            self.expect("in")
            body = self.expr()
            return self.let_(binder, ty, bound, body)
        if self.at("if"):
            self.i += 1
            c = self.expr()
            self.expect("then")
            a = self.expr()
            self.expect("else")
            b = self.expr()
            return If(c, a, b)
        return self.arith()

    def binder(self):
        if self.at("("):
            self.i += 1
            parts = [self.binder()]
            while self.at(","):
                self.i += 1
                parts.append(self.binder())
            self.expect(")")
            return parts[0] if len(parts) == 1 else tuple(parts)
        return self.ident()

    def lam(self, binder, ty, body) -> Term:
        if isinstance(binder, str):
            return Abs(binder, ty, body)
        elems = ty.elems if hasattr(ty, "elems") else None
        if elems is None or len(elems) != len(binder):
            self.error(f"tuple binder of {len(binder)} names needs a {len(binder)}-tuple type")
        p = self.fresh()
        return Abs(p, ty, self.destructure(binder, elems, p, body))

    def let_(self, binder, ty, bound, body) -> Term:
        if isinstance(binder, str):
            return let(binder, bound, body, ty)
        elems = None
        if ty is not None:
            elems = ty.elems if hasattr(ty, "elems") else None
            if elems is None or len(elems) != len(binder):
                self.error(f"tuple binder of {len(binder)} names needs a {len(binder)}-tuple type")
        p = self.fresh()
        return let(p, bound, self.destructure(binder, elems, p, body), ty)

    def destructure(self, names, types, p, body) -> Term:
        # innermost binding first so that the outermost let binds names[0]
        for k in range(len(names) - 1, -1, -1):
            ty = None if types is None else types[k]
            proj = Proj(k + 1, Var(p), len(names))
            name = names[k]
            if isinstance(name, str):
                body = let(name, proj, body, ty)
            else:
                q = self.fresh()
                sub = None if ty is None else getattr(ty, "elems", None)
                if ty is not None and (sub is None or len(sub) != len(name)):
                    self.error("nested tuple binder does not match its type")
                body = let(q, proj, self.destructure(name, sub, q, body), ty)
        return body

    # -- operators ----------------------------------------------------------

    def arith(self) -> Term:
        tok = self.tok
        return self.mark(self._arith(), tok)

    def _arith(self) -> Term:
        t = self.mul()
        while self.at("+") or self.at("-"):
            op = Prim.ADD if self.tok.text == "+" else Prim.SUB
            self.i += 1
            t = PrimApp(op, (t, self.mul()))
        return t

    def mul(self) -> Term:
        tok = self.tok
        return self.mark(self._mul(), tok)

    def _mul(self) -> Term:
        t = self.app()
        while self.at("*") or self.at("/"):
            op = Prim.MUL if self.tok.text == "*" else Prim.DIV
            self.i += 1
            t = PrimApp(op, (t, self.app()))
        return t

    def starts_aterm(self) -> bool:
        tok = self.tok
        if tok.kind in ("ident", "num"):
            return True
        if tok.kind == "sym":
            return tok.text == "("
        return tok.kind == "kw" and (tok.text in _PRIMS or tok.text in _DISTS
                                     or tok.text == "wiener")

    def app(self) -> Term:
        tok = self.tok
        return self.mark(self._app(), tok)

    def _app(self) -> Term:
        t = self.head()
        while self.starts_aterm():
            t = App(t, self.aterm())
        return t

    def head(self) -> Term:
        tok = self.tok
        return self.mark(self._head(), tok)

    def _head(self) -> Term:
        tok = self.tok
        if tok.kind != "kw":
            return self.aterm(allow_neg=True)
        kw = tok.text
        if kw in ("assume", "weight", "infer"):
            self.i += 1
            arg = self.aterm()
            return {"assume": Assume, "weight": Weight, "infer": Infer}[kw](arg)
        if kw in ("diffA", "diffP", "diff1A", "diff1P"):
            self.i += 1
            d = Coeffect.A if kw.endswith("A") else Coeffect.P
            f = self.aterm()
            x = self.aterm()
            if kw.startswith("diff1"):
                return App(Diff(d, f, x), RealLit(1.0))
            return Diff(d, f, x)
        if kw == "solve":
            self.i += 1
            f = self.aterm()
            y0 = self.aterm()
            x1 = self.aterm()
            return Solve(f, y0, x1)
        if kw == "observe":
            self.i += 1
            obs = self.aterm()
            self.expect("from")
            dtok = self.tok
            d = self.aterm()
            if not isinstance(d, DistCon) or d.dist not in _PDF_OF:
                self.error("observe needs a Gaussian or Beta distribution literal", dtok)
            return Weight(PrimApp(_PDF_OF[d.dist], d.params + (obs,)))
        if kw == "unroll":
            self.i += 1
            if self.tok.kind != "num" or not re.fullmatch(r"[0-9]+", self.tok.text):
                self.error("unroll needs a literal natural number count")
            n = int(self.tok.text)
            self.i += 1
            return desugar_unroll(n, self.aterm())
        return self.aterm(allow_neg=True)

    def aterm(self, allow_neg=False) -> Term:
        tok = self.tok
        return self.mark(self._aterm(allow_neg), tok)

    def _aterm(self, allow_neg=False) -> Term:
        tok = self.tok
        if allow_neg and self.at("-") and self.toks[self.i + 1].kind == "num":
            self.i += 1
            t = RealLit(-float(self.tok.text))
            self.i += 1
        elif tok.kind == "ident":
            self.i += 1
            t = Var(tok.text)
        elif tok.kind == "num":
            self.i += 1
            t = RealLit(float(tok.text))
        elif self.at("("):
            self.i += 1
            elems = []
            if not self.at(")"):
                elems.append(self.expr())
                while self.at(","):
                    self.i += 1
                    elems.append(self.expr())
            self.expect(")")
            t = tuple_term(elems) if elems else UNIT_TERM
        elif tok.kind == "kw" and tok.text in _PRIMS:
            self.i += 1
            prim = _PRIMS[tok.text]
            args = self.call_args()
            if len(args) != prim.arity:
                self.error(f"{tok.text} takes {prim.arity} argument(s), got {len(args)}", tok)
            t = PrimApp(prim, tuple(args))
        elif tok.kind == "kw" and tok.text == "wiener":
            self.i += 1
            self.expect("(")
            neg = self.at("-")
            if neg:
                self.i += 1
            if self.tok.kind != "num":
                self.error("wiener needs a literal realization index in [0, 1]")
            p = float(self.tok.text) * (-1 if neg else 1)
            if not 0.0 <= p <= 1.0:
                self.error("wiener realization index must lie in [0, 1]")
            self.i += 1
            self.expect(",")
            arg = self.expr()
            self.expect(")")
            t = PrimApp(WienerFn(p), (arg,))
        elif tok.kind == "kw" and tok.text in _DISTS:
            self.i += 1
            dist = _DISTS[tok.text]
            self.expect("(")
            args = []
            if not self.at(")"):
                args.append(self.expr())
                while self.at(","):
                    self.i += 1
                    args.append(self.expr())
            self.expect(")")
            if len(args) != dist.arity:
                self.error(f"{tok.text} takes {dist.arity} parameter(s), got {len(args)}", tok)
            t = DistCon(dist, tuple(args))
        else:
            self.error(f"unexpected {tok.text or 'end of input'!r}")
        while self.at(".") and self.toks[self.i + 1].kind == "num":
            self.i += 1
            idx = int(self.tok.text)
            if idx < 1:
                self.error("projection index starts at 1")
            self.i += 1
            t = Proj(idx, t)
        return t

    def call_args(self):
        self.expect("(")
        args = [self.expr()]
        while self.at(","):
            self.i += 1
            args.append(self.expr())
        self.expect(")")
        return args

    # -- types --------------------------------------------------------------

    def type_(self):
        t = self.btype()
        if self.tok.kind == "arrow":
            eff = Effect.DET if self.tok.text == "->det" else Effect.RND
            self.i += 1
            return Arrow(t, eff, self.type_())
        return t

    def btype(self):
        tok = self.tok
        if tok.text in ("RealA", "RealP", "RealN") and tok.kind == "kw":
            self.i += 1
            return Real(Coeffect[tok.text[-1]])
        if self.at("Dist"):
            self.i += 1
            return DistT(self.btype())
        if self.at("("):
            self.i += 1
            elems = []
            if not self.at(")"):
                elems.append(self.type_())
                while self.at(","):
                    self.i += 1
                    elems.append(self.type_())
            self.expect(")")
            return tuple_type(elems)
        self.error(f"expected a type, found {tok.text or 'end of input'!r}")


def desugar_unroll(count: int, body: Term) -> Term:
    """``unroll n f`` = ``(f 1, ..., f n)`` evaluated left to right.

    A literal lambda has its index substituted directly.
    """
    items = []
    for k in range(1, count + 1):
        idx = RealLit(float(k))
        if isinstance(body, Abs):
            items.append(subst(body.body, body.param, idx))
        else:
            items.append(App(body, idx))
    return tuple_term(items) if items else UNIT_TERM


def parse(src: "SourceProgram | str") -> Term:
    if isinstance(src, str):
        src = SourceProgram(src)
    return Parser(src).program()


def parse_with_positions(src: "SourceProgram | str"):
    """Like :func:`parse` but also returns the id(term) -> (line, col) table."""
    if isinstance(src, str):
        src = SourceProgram(src)
    p = Parser(src)
    t = p.program()
    return t, p.positions


def parse_type(text: str):
    p = Parser(SourceProgram(text))
    ty = p.type_()
    if p.tok.kind != "eof":
        p.error("trailing input after type")
    return ty
