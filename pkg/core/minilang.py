"""
Mini Language - Tokenizer, recursive-descent parser and printer for a small Java-like
method language.

Grammar:
    method   := type IDENT "(" [param {"," param}] ")" block
    param    := type IDENT
    type     := "int" | "bool" | "void"
    block    := "{" {stmt} "}"
    stmt     := decl | assign | if | while | return | exprstmt
    decl     := type IDENT ["=" expr] ";"
    assign   := IDENT "=" expr ";"
    if       := "if" "(" expr ")" block ["else" block]
    while    := "while" "(" expr ")" block
    return   := "return" [expr] ";"
    exprstmt := expr ";"
    expr     := precedence climbing over || ; && ; == != ; < <= > >= ; + - ; * / %
    unary    := ("!" | "-") unary | primary
    primary  := INT_LIT | BOOL_LIT | IDENT ["(" [expr {"," expr}] ")"] | "(" expr ")"
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, List, Optional, Union

from .ast_tree import AstTree, RawNode, build_tree
from .errors import LexError, ParseError


class TokenKind(Enum):
    KEYWORD = "KEYWORD"
    IDENT = "IDENT"
    INT_LIT = "INT_LIT"
    BOOL_LIT = "BOOL_LIT"
    PUNCT = "PUNCT"
    OP = "OP"


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    text: str
    offset: int


TYPE_NAMES = frozenset({"int", "bool", "void"})
KEYWORDS = TYPE_NAMES | {"if", "else", "while", "return"}
BOOL_LITERALS = frozenset({"true", "false"})
PUNCTUATION = frozenset("(){},;")
TWO_CHAR_OPS = frozenset({"<=", ">=", "==", "!=", "&&", "||"})
ONE_CHAR_OPS = frozenset("<>=+-*/%!")
WHITESPACE = frozenset(" \t\r\n")

# Binary operator -> precedence level (higher binds tighter)
BINARY_LEVELS: Dict[str, int] = {
    "||": 1,
    "&&": 2,
    "==": 3, "!=": 3,
    "<": 4, "<=": 4, ">": 4, ">=": 4,
    "+": 5, "-": 5,
    "*": 6, "/": 6, "%": 6,
}
UNARY_OPS = frozenset({"!", "-"})
MAX_NESTING = 100

_EXPR_STARTS = frozenset({"INT_LIT", "BOOL_LIT", "IDENT", "'('", "'!'", "'-'"})
_STMT_STARTS = _EXPR_STARTS | {f"'{word}'" for word in ("int", "bool", "void", "if", "while", "return")}


def _byte_text(source: Union[str, bytes]) -> str:
    """One character per UTF-8 byte, so string offsets are byte offsets."""
    if isinstance(source, str):
        source = source.encode("utf-8")
    return bytes(source).decode("latin-1")


def tokenize(source: Union[str, bytes]) -> List[Token]:
    """
    Split source into tokens; whitespace and // comments are skipped.

    Offsets are byte positions in the UTF-8 encoding of `source`.
    """
    source = _byte_text(source)
    tokens: List[Token] = []
    pos = 0
    length = len(source)
    while pos < length:
        char = source[pos]
        if char in WHITESPACE:
            pos += 1
        elif source.startswith("//", pos):
            newline = source.find("\n", pos)
            pos = length if newline < 0 else newline
        elif char.isascii() and (char.isalpha() or char == "_"):
            end = pos + 1
            while end < length and source[end].isascii() and (source[end].isalnum() or source[end] == "_"):
                end += 1
            word = source[pos:end]
            if word in BOOL_LITERALS:
                kind = TokenKind.BOOL_LIT
            elif word in KEYWORDS:
                kind = TokenKind.KEYWORD
            else:
                kind = TokenKind.IDENT
            tokens.append(Token(kind, word, pos))
            pos = end
        elif char.isascii() and char.isdigit():
            end = pos + 1
            while end < length and source[end].isascii() and source[end].isdigit():
                end += 1
            tokens.append(Token(TokenKind.INT_LIT, source[pos:end], pos))
            pos = end
        elif source[pos:pos + 2] in TWO_CHAR_OPS:
            tokens.append(Token(TokenKind.OP, source[pos:pos + 2], pos))
            pos += 2
        elif char in ONE_CHAR_OPS:
            tokens.append(Token(TokenKind.OP, char, pos))
            pos += 1
        elif char in PUNCTUATION:
            tokens.append(Token(TokenKind.PUNCT, char, pos))
            pos += 1
        else:
            raise LexError(pos, char)
    return tokens


@dataclass
class SyntaxNode:
    """Mutable nested node used while parsing or generating; frozen into an AstTree."""
    kind: str
    value: Optional[str] = None
    children: List["SyntaxNode"] = field(default_factory=list)

    def to_tree(self) -> AstTree:
        raw: List[RawNode] = []
        stack = [(self, -1)]
        while stack:
            node, parent = stack.pop()
            index = len(raw)
            raw.append((node.kind, node.value, []))
            if parent >= 0:
                raw[parent][2].append(index)
            stack.extend((child, index) for child in reversed(node.children))
        return build_tree(raw)


class _Parser:
    def __init__(self, tokens: List[Token], end_offset: int):
        self.tokens = tokens
        self.pos = 0
        self.end_offset = end_offset
        self.depth = 0

    # Token helpers

    def _peek(self, ahead: int = 0) -> Optional[Token]:
        index = self.pos + ahead
        return self.tokens[index] if index < len(self.tokens) else None

    def _offset(self) -> int:
        token = self._peek()
        return token.offset if token else self.end_offset

    def _found(self) -> str:
        token = self._peek()
        return repr(token.text) if token else "end of input"

    def _fail(self, expected) -> ParseError:
        return ParseError(self._offset(), expected, self._found())

    def _check(self, text: str) -> bool:
        token = self._peek()
        return token is not None and token.text == text and token.kind in (
            TokenKind.PUNCT, TokenKind.OP, TokenKind.KEYWORD
        )

    def _expect(self, text: str) -> Token:
        if not self._check(text):
            raise self._fail([f"'{text}'"])
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def _expect_kind(self, kind: TokenKind) -> Token:
        token = self._peek()
        if token is None or token.kind is not kind:
            raise self._fail([kind.value])
        self.pos += 1
        return token

    def _enter(self) -> None:
        self.depth += 1
        if self.depth > MAX_NESTING:
            raise ParseError(self._offset(), [f"nesting depth <= {MAX_NESTING}"], self._found())

    def _leave(self) -> None:
        self.depth -= 1

    # Grammar

    def method(self) -> SyntaxNode:
        type_name = self._type()
        name = self._expect_kind(TokenKind.IDENT)
        node = SyntaxNode("MethodDeclaration", name.text, [type_name])
        self._expect("(")
        if not self._check(")"):
            node.children.append(self._param())
            while self._check(","):
                self.pos += 1
                node.children.append(self._param())
        self._expect(")")
        node.children.append(self._block())
        if self._peek() is not None:
            raise self._fail(["end of input"])
        return node

    def _type(self) -> SyntaxNode:
        token = self._peek()
        if token is None or token.kind is not TokenKind.KEYWORD or token.text not in TYPE_NAMES:
            raise self._fail(["'bool'", "'int'", "'void'"])
        self.pos += 1
        return SyntaxNode("TypeName", token.text)

    def _param(self) -> SyntaxNode:
        type_name = self._type()
        name = self._expect_kind(TokenKind.IDENT)
        return SyntaxNode("Parameter", None, [type_name, SyntaxNode("Identifier", name.text)])

    def _block(self) -> SyntaxNode:
        self._enter()
        self._expect("{")
        block = SyntaxNode("Block")
        while not self._check("}"):
            if self._peek() is None:
                raise self._fail({"'}'"} | _STMT_STARTS)
            block.children.append(self._statement())
        self.pos += 1
        self._leave()
        return block

    def _statement(self) -> SyntaxNode:
        token = self._peek()
        if token.kind is TokenKind.KEYWORD:
            if token.text in TYPE_NAMES:
                return self._declaration()
            if token.text == "if":
                return self._if()
            if token.text == "while":
                self.pos += 1
                self._expect("(")
                condition = self.expression()
                self._expect(")")
                return SyntaxNode("While", None, [condition, self._block()])
            if token.text == "return":
                self.pos += 1
                node = SyntaxNode("Return")
                if not self._check(";"):
                    node.children.append(self.expression())
                self._expect(";")
                return node
            raise self._fail(_STMT_STARTS)
        following = self._peek(1)
        if (token.kind is TokenKind.IDENT and following is not None
                and following.kind is TokenKind.OP and following.text == "="):
            self.pos += 2
            node = SyntaxNode("Assign", None, [SyntaxNode("Identifier", token.text), self.expression()])
            self._expect(";")
            return node
        node = SyntaxNode("ExprStmt", None, [self.expression()])
        self._expect(";")
        return node

    def _declaration(self) -> SyntaxNode:
        type_name = self._type()
        name = self._expect_kind(TokenKind.IDENT)
        node = SyntaxNode("VarDecl", None, [type_name, SyntaxNode("Identifier", name.text)])
        if self._check("="):
            self.pos += 1
            node.children.append(self.expression())
        self._expect(";")
        return node

    def _if(self) -> SyntaxNode:
        self.pos += 1
        self._expect("(")
        condition = self.expression()
        self._expect(")")
        node = SyntaxNode("If", None, [condition, self._block()])
        if self._check("else"):
            self.pos += 1
            node.children.append(self._block())
        return node

    def expression(self, min_level: int = 1) -> SyntaxNode:
        self._enter()
        left = self._unary()
        while True:
            token = self._peek()
            if token is None or token.kind is not TokenKind.OP:
                break
            level = BINARY_LEVELS.get(token.text)
            if level is None or level < min_level:
                break
            self.pos += 1
            right = self.expression(level + 1)
            left = SyntaxNode("BinaryOp", token.text, [left, right])
        self._leave()
        return left

    def _unary(self) -> SyntaxNode:
        token = self._peek()
        if token is not None and token.kind is TokenKind.OP and token.text in UNARY_OPS:
            self._enter()
            self.pos += 1
            node = SyntaxNode("UnaryOp", token.text, [self._unary()])
            self._leave()
            return node
        return self._primary()

    def _primary(self) -> SyntaxNode:
        token = self._peek()
        if token is None:
            raise self._fail(_EXPR_STARTS)
        if token.kind is TokenKind.INT_LIT:
            self.pos += 1
            return SyntaxNode("IntLiteral", token.text)
        if token.kind is TokenKind.BOOL_LIT:
            self.pos += 1
            return SyntaxNode("BoolLiteral", token.text)
        if token.kind is TokenKind.IDENT:
            self.pos += 1
            if not self._check("("):
                return SyntaxNode("Identifier", token.text)
            self.pos += 1
            call = SyntaxNode("Call", token.text)
            if not self._check(")"):
                call.children.append(self.expression())
                while self._check(","):
                    self.pos += 1
                    call.children.append(self.expression())
            self._expect(")")
            return call
        if self._check("("):
            self.pos += 1
            inner = self.expression()
            self._expect(")")
            return inner
        raise self._fail(_EXPR_STARTS)


def parse_syntax(tokens: List[Token], end_offset: Optional[int] = None) -> SyntaxNode:
    if end_offset is None:
        end_offset = tokens[-1].offset + len(tokens[-1].text) if tokens else 0
    parser = _Parser(tokens, end_offset)
    try:
        return parser.method()
    except RecursionError:
        raise ParseError(parser._offset(), [f"nesting depth <= {MAX_NESTING}"], parser._found()) from None


def parse_method(tokens: List[Token], end_offset: Optional[int] = None) -> AstTree:
    """Parse a tokenized method into an AstTree."""
    return parse_syntax(tokens, end_offset).to_tree()


def parse_source(source: Union[str, bytes]) -> AstTree:
    data = source.encode("utf-8") if isinstance(source, str) else bytes(source)
    return parse_method(tokenize(data), len(data))


# Printer

def render_method(method: SyntaxNode) -> str:
    """Pretty-print a MethodDeclaration so that parsing it gives back the same tree."""
    type_name, *params, body = method.children
    rendered_params = ", ".join(
        f"{param.children[0].value} {param.children[1].value}" for param in params
    )
    lines = [f"{type_name.value} {method.value}({rendered_params}) {{"]
    _render_statements(body, 1, lines)
    lines.append("}")
    return "\n".join(lines) + "\n"


def _render_statements(block: SyntaxNode, indent: int, lines: List[str]) -> None:
    pad = "    " * indent
    for stmt in block.children:
        kind = stmt.kind
        if kind == "VarDecl":
            text = f"{stmt.children[0].value} {stmt.children[1].value}"
            if len(stmt.children) == 3:
                text += f" = {render_expression(stmt.children[2])}"
            lines.append(f"{pad}{text};")
        elif kind == "Assign":
            lines.append(f"{pad}{stmt.children[0].value} = {render_expression(stmt.children[1])};")
        elif kind == "Return":
            if stmt.children:
                lines.append(f"{pad}return {render_expression(stmt.children[0])};")
            else:
                lines.append(f"{pad}return;")
        elif kind == "ExprStmt":
            lines.append(f"{pad}{render_expression(stmt.children[0])};")
        elif kind in ("If", "While"):
            keyword = "if" if kind == "If" else "while"
            lines.append(f"{pad}{keyword} ({render_expression(stmt.children[0])}) {{")
            _render_statements(stmt.children[1], indent + 1, lines)
            if len(stmt.children) == 3:
                lines.append(f"{pad}}} else {{")
                _render_statements(stmt.children[2], indent + 1, lines)
            lines.append(f"{pad}}}")
        else:
            raise ValueError(f"cannot render statement kind {kind}")


def render_expression(node: SyntaxNode) -> str:
    kind = node.kind
    if kind in ("Identifier", "IntLiteral", "BoolLiteral"):
        return node.value
    if kind == "Call":
        return f"{node.value}({', '.join(render_expression(arg) for arg in node.children)})"
    if kind == "UnaryOp":
        operand = node.children[0]
        text = render_expression(operand)
        if operand.kind == "BinaryOp":
            text = f"({text})"
        return f"{node.value}{text}"
    if kind == "BinaryOp":
        level = BINARY_LEVELS[node.value]
        left, right = node.children
        left_text = render_expression(left)
        right_text = render_expression(right)
        if left.kind == "BinaryOp" and BINARY_LEVELS[left.value] < level:
            left_text = f"({left_text})"
        if right.kind == "BinaryOp" and BINARY_LEVELS[right.value] <= level:
            right_text = f"({right_text})"
        return f"{left_text} {node.value} {right_text}"
    raise ValueError(f"cannot render expression kind {kind}")


def summary_tokens(text: str) -> List[str]:
    """Summary tokenization shared by vocabularies and metrics: lowercase, whitespace split."""
    return text.lower().split()


GRAMMAR_KINDS: FrozenSet[str] = frozenset({
    "MethodDeclaration", "TypeName", "Parameter", "Block", "VarDecl", "Assign", "If", "While",
    "Return", "ExprStmt", "BinaryOp", "UnaryOp", "Call", "Identifier", "IntLiteral", "BoolLiteral",
})
