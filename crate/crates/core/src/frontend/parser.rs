use super::ast::{Ast, AstKind, Basic, NodeId, ProgramAst, Span, Ty};
use super::lexer::tokenize;
use super::resolve;
use super::token::{Token, TokenKind};
use super::FrontendError;

/// Binding powers for precedence climbing, weakest first.
fn bin_prec(op: &str) -> Option<u8> {
    Some(match op {
        "||" => 1,
        "&&" => 2,
        "==" | "!=" => 3,
        "<" | "<=" | ">" | ">=" => 4,
        "+" | "-" => 5,
        "*" | "/" | "%" => 6,
        _ => return None,
    })
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    ast: Ast,
}

/// Parses a token stream into a resolved, type-annotated program. The first
/// syntax or resolution error aborts parsing.
pub fn parse(tokens: &[Token]) -> Result<ProgramAst, FrontendError> {
    let mut p = Parser { tokens, pos: 0, ast: Ast::new() };
    let root = p.ast.alloc(AstKind::Program, Span::default());
    while p.peek().is_some() {
        if p.at_keyword("type") {
            let rec = p.record_decl()?;
            p.ast.adopt(root, rec);
        } else {
            let func = p.func_decl()?;
            p.ast.adopt(root, func);
        }
    }
    resolve::resolve(p.ast, root)
}

/// Tokenizes and parses in one step.
pub fn parse_source(source: &str) -> Result<ProgramAst, FrontendError> {
    parse(&tokenize(source)?)
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_at(&self, off: usize) -> Option<&Token> {
        self.tokens.get(self.pos + off)
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        self.pos += 1;
        t
    }

    fn at(&self, kind: TokenKind, text: &str) -> bool {
        self.peek().is_some_and(|t| t.is(kind, text))
    }

    fn at_keyword(&self, kw: &str) -> bool {
        self.at(TokenKind::Keyword, kw)
    }

    fn at_punct(&self, p: &str) -> bool {
        self.at(TokenKind::Punct, p)
    }

    fn at_op(&self, op: &str) -> bool {
        self.at(TokenKind::Op, op)
    }

    fn span_here(&self) -> Span {
        match self.peek() {
            Some(t) => Span { line: t.line, col: t.col },
            None => self
                .tokens
                .last()
                .map(|t| Span { line: t.line, col: t.col + t.text.len() as u32 })
                .unwrap_or_default(),
        }
    }

    fn error(&self, expected: &str) -> FrontendError {
        let span = self.span_here();
        let found = match self.peek() {
            Some(t) => format!("'{}'", t.text),
            None => "end of input".into(),
        };
        FrontendError::Parse {
            line: span.line,
            col: span.col,
            message: format!("expected {expected}, found {found}"),
        }
    }

    fn expect(&mut self, kind: TokenKind, text: &str) -> Result<Token, FrontendError> {
        if self.at(kind, text) {
            Ok(self.bump())
        } else {
            Err(self.error(&format!("'{text}'")))
        }
    }

    fn expect_ident(&mut self, what: &str) -> Result<Token, FrontendError> {
        if self.peek().is_some_and(|t| t.kind == TokenKind::Ident) {
            Ok(self.bump())
        } else {
            Err(self.error(what))
        }
    }

    fn at_basic_type(&self) -> bool {
        self.at_keyword("int") || self.at_keyword("float") || self.at_keyword("bool")
    }

    /// `int` | `float` | `bool` | `int[]` | `float[]` | `bool[]` | RecordName
    fn parse_type(&mut self) -> Result<Ty, FrontendError> {
        if self.at_basic_type() {
            let kw = self.bump();
            let basic = match kw.text.as_str() {
                "int" => Basic::Int,
                "float" => Basic::Float,
                _ => Basic::Bool,
            };
            if self.at_punct("[") && self.peek_at(1).is_some_and(|t| t.is(TokenKind::Punct, "]")) {
                self.bump();
                self.bump();
                return Ok(Ty::Array(basic));
            }
            return Ok(Ty::basic(basic));
        }
        if self.peek().is_some_and(|t| t.kind == TokenKind::Ident) {
            let name = self.bump();
            return Ok(Ty::Record(name.text));
        }
        Err(self.error("a type"))
    }

    fn record_decl(&mut self) -> Result<NodeId, FrontendError> {
        let kw = self.expect(TokenKind::Keyword, "type")?;
        let name = self.expect_ident("a record type name")?;
        if !name.text.starts_with(|c: char| c.is_ascii_uppercase()) {
            return Err(FrontendError::Parse {
                line: name.line,
                col: name.col,
                message: format!("record type name '{}' must start with an uppercase letter", name.text),
            });
        }
        let node = self.ast.alloc(AstKind::RecordDecl, Span { line: kw.line, col: kw.col });
        self.ast.set_text(node, name.text);
        self.expect(TokenKind::Punct, "{")?;
        while !self.at_punct("}") {
            let span = self.span_here();
            let mut ty = self.parse_type()?;
            let fname = self.expect_ident("a field name")?;
            // `float data[];` arrays the field type.
            if self.at_punct("[") {
                self.bump();
                self.expect(TokenKind::Punct, "]")?;
                ty = match ty {
                    Ty::Int => Ty::Array(Basic::Int),
                    Ty::Float => Ty::Array(Basic::Float),
                    Ty::Bool => Ty::Array(Basic::Bool),
                    other => {
                        return Err(FrontendError::Parse {
                            line: fname.line,
                            col: fname.col,
                            message: format!("cannot declare an array of '{other}'"),
                        })
                    }
                };
            }
            self.expect(TokenKind::Punct, ";")?;
            let field = self.ast.alloc(AstKind::FieldDecl, span);
            self.ast.set_text(field, fname.text);
            self.ast.set_ty(field, ty);
            self.ast.adopt(node, field);
        }
        self.expect(TokenKind::Punct, "}")?;
        Ok(node)
    }

    fn func_decl(&mut self) -> Result<NodeId, FrontendError> {
        let span = self.span_here();
        let ret = self.parse_type()?;
        let name = self.expect_ident("a function name")?;
        let node = self.ast.alloc(AstKind::FuncDecl, span);
        self.ast.set_text(node, name.text);
        self.ast.set_ty(node, ret);
        self.expect(TokenKind::Punct, "(")?;
        if !self.at_punct(")") {
            loop {
                let pspan = self.span_here();
                let mut ty = self.parse_type()?;
                let pname = self.expect_ident("a parameter name")?;
                if self.at_punct("[") {
                    self.bump();
                    self.expect(TokenKind::Punct, "]")?;
                    ty = match ty {
                        Ty::Int => Ty::Array(Basic::Int),
                        Ty::Float => Ty::Array(Basic::Float),
                        Ty::Bool => Ty::Array(Basic::Bool),
                        other => {
                            return Err(FrontendError::Parse {
                                line: pspan.line,
                                col: pspan.col,
                                message: format!("cannot declare an array of '{other}'"),
                            })
                        }
                    };
                }
                let param = self.ast.alloc(AstKind::Param, pspan);
                self.ast.set_text(param, pname.text);
                self.ast.set_ty(param, ty);
                self.ast.adopt(node, param);
                if self.at_punct(",") {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(TokenKind::Punct, ")")?;
        let body = self.block()?;
        self.ast.adopt(node, body);
        Ok(node)
    }

    fn block(&mut self) -> Result<NodeId, FrontendError> {
        let span = self.span_here();
        self.expect(TokenKind::Punct, "{")?;
        let node = self.ast.alloc(AstKind::Block, span);
        while !self.at_punct("}") {
            if self.peek().is_none() {
                return Err(self.error("'}'"));
            }
            let stmt = self.stmt()?;
            self.ast.adopt(node, stmt);
        }
        self.expect(TokenKind::Punct, "}")?;
        Ok(node)
    }

    fn at_decl_start(&self) -> bool {
        if self.at_basic_type() {
            return true;
        }
        // `RecordName name ...`
        self.peek().is_some_and(|t| t.kind == TokenKind::Ident)
            && self.peek_at(1).is_some_and(|t| t.kind == TokenKind::Ident)
    }

    fn stmt(&mut self) -> Result<NodeId, FrontendError> {
        if self.at_punct("{") {
            return self.block();
        }
        if self.at_keyword("if") {
            return self.if_stmt();
        }
        if self.at_keyword("while") {
            return self.while_stmt();
        }
        if self.at_keyword("for") {
            return self.for_stmt();
        }
        if self.at_keyword("switch") {
            return self.switch_stmt();
        }
        if self.at_keyword("return") {
            let kw = self.bump();
            let node = self.ast.alloc(AstKind::Return, Span { line: kw.line, col: kw.col });
            let value = self.expr()?;
            self.ast.adopt(node, value);
            self.expect(TokenKind::Punct, ";")?;
            return Ok(node);
        }
        if self.at_decl_start() {
            let node = self.var_decl()?;
            self.expect(TokenKind::Punct, ";")?;
            return Ok(node);
        }
        let node = self.assign_or_expr_stmt()?;
        self.expect(TokenKind::Punct, ";")?;
        Ok(node)
    }

    /// Declaration without the trailing `;`:
    /// `T x`, `T x = e`, `int a[]`, `int a[] = e`, or `int a[n]`.
    fn var_decl(&mut self) -> Result<NodeId, FrontendError> {
        let span = self.span_here();
        let mut ty = self.parse_type()?;
        let name = self.expect_ident("a variable name")?;
        if self.at_punct("[") {
            self.bump();
            let basic = match ty {
                Ty::Int => Basic::Int,
                Ty::Float => Basic::Float,
                Ty::Bool => Basic::Bool,
                other => {
                    return Err(FrontendError::Parse {
                        line: span.line,
                        col: span.col,
                        message: format!("cannot declare an array of '{other}'"),
                    })
                }
            };
            if self.at_punct("]") {
                self.bump();
                ty = Ty::Array(basic);
            } else {
                // Sized form: the extent expression initializes the array.
                let size = self.expr()?;
                self.expect(TokenKind::Punct, "]")?;
                let node = self.ast.alloc(AstKind::SizedArrayDecl, span);
                self.ast.set_text(node, name.text);
                self.ast.set_ty(node, Ty::Array(basic));
                self.ast.adopt(node, size);
                return Ok(node);
            }
        }
        let node = self.ast.alloc(AstKind::VarDecl, span);
        self.ast.set_text(node, name.text);
        self.ast.set_ty(node, ty);
        if self.at_op("=") {
            self.bump();
            let init = self.expr()?;
            self.ast.adopt(node, init);
        }
        Ok(node)
    }

    /// Assignment or bare-expression statement, without the trailing `;`.
    fn assign_or_expr_stmt(&mut self) -> Result<NodeId, FrontendError> {
        let span = self.span_here();
        let e = self.expr()?;
        if self.at_op("=") {
            if !matches!(self.ast.kind(e), AstKind::Local | AstKind::ArrayRef | AstKind::FieldRef) {
                return Err(FrontendError::Parse {
                    line: span.line,
                    col: span.col,
                    message: "invalid assignment target".into(),
                });
            }
            self.bump();
            let rhs = self.expr()?;
            let node = self.ast.alloc(AstKind::Assign, span);
            self.ast.adopt(node, e);
            self.ast.adopt(node, rhs);
            return Ok(node);
        }
        let node = self.ast.alloc(AstKind::ExprStmt, span);
        self.ast.adopt(node, e);
        Ok(node)
    }

    fn if_stmt(&mut self) -> Result<NodeId, FrontendError> {
        let kw = self.bump();
        let node = self.ast.alloc(AstKind::If, Span { line: kw.line, col: kw.col });
        self.expect(TokenKind::Punct, "(")?;
        let cond = self.expr()?;
        self.expect(TokenKind::Punct, ")")?;
        self.ast.adopt(node, cond);
        let then = self.stmt()?;
        self.ast.adopt(node, then);
        if self.at_keyword("else") {
            self.bump();
            let alt = self.stmt()?;
            self.ast.adopt(node, alt);
        }
        Ok(node)
    }

    fn while_stmt(&mut self) -> Result<NodeId, FrontendError> {
        let kw = self.bump();
        let node = self.ast.alloc(AstKind::While, Span { line: kw.line, col: kw.col });
        self.expect(TokenKind::Punct, "(")?;
        let cond = self.expr()?;
        self.expect(TokenKind::Punct, ")")?;
        self.ast.adopt(node, cond);
        let body = self.stmt()?;
        self.ast.adopt(node, body);
        Ok(node)
    }

    fn for_stmt(&mut self) -> Result<NodeId, FrontendError> {
        let kw = self.bump();
        let node = self.ast.alloc(AstKind::For, Span { line: kw.line, col: kw.col });
        self.expect(TokenKind::Punct, "(")?;
        let init = if self.at_decl_start() { self.var_decl()? } else { self.assign_or_expr_stmt()? };
        self.expect(TokenKind::Punct, ";")?;
        let cond = self.expr()?;
        self.expect(TokenKind::Punct, ";")?;
        let step = self.assign_or_expr_stmt()?;
        self.expect(TokenKind::Punct, ")")?;
        let body = self.stmt()?;
        self.ast.adopt(node, init);
        self.ast.adopt(node, cond);
        self.ast.adopt(node, step);
        self.ast.adopt(node, body);
        Ok(node)
    }

    fn switch_stmt(&mut self) -> Result<NodeId, FrontendError> {
        let kw = self.bump();
        let node = self.ast.alloc(AstKind::Switch, Span { line: kw.line, col: kw.col });
        self.expect(TokenKind::Punct, "(")?;
        let scrutinee = self.expr()?;
        self.expect(TokenKind::Punct, ")")?;
        self.ast.adopt(node, scrutinee);
        self.expect(TokenKind::Punct, "{")?;
        let mut seen_default = false;
        while !self.at_punct("}") {
            if self.at_keyword("case") {
                let ckw = self.bump();
                let mut text = String::new();
                if self.at_op("-") {
                    self.bump();
                    text.push('-');
                }
                let lit = if self.peek().is_some_and(|t| t.kind == TokenKind::IntLit) {
                    self.bump()
                } else {
                    return Err(self.error("an integer case label"));
                };
                text.push_str(&lit.text);
                self.expect(TokenKind::Punct, ":")?;
                let arm = self.ast.alloc(AstKind::CaseArm, Span { line: ckw.line, col: ckw.col });
                self.ast.set_text(arm, text);
                while !(self.at_keyword("case") || self.at_keyword("default") || self.at_punct("}")) {
                    let s = self.stmt()?;
                    self.ast.adopt(arm, s);
                }
                self.ast.adopt(node, arm);
            } else if self.at_keyword("default") {
                let dkw = self.bump();
                if seen_default {
                    return Err(FrontendError::Parse {
                        line: dkw.line,
                        col: dkw.col,
                        message: "duplicate default arm".into(),
                    });
                }
                seen_default = true;
                self.expect(TokenKind::Punct, ":")?;
                let arm = self.ast.alloc(AstKind::DefaultArm, Span { line: dkw.line, col: dkw.col });
                while !(self.at_keyword("case") || self.at_keyword("default") || self.at_punct("}")) {
                    let s = self.stmt()?;
                    self.ast.adopt(arm, s);
                }
                self.ast.adopt(node, arm);
            } else {
                return Err(self.error("'case' or 'default'"));
            }
        }
        self.expect(TokenKind::Punct, "}")?;
        Ok(node)
    }

    fn expr(&mut self) -> Result<NodeId, FrontendError> {
        self.binary_expr(1)
    }

    fn binary_expr(&mut self, min_prec: u8) -> Result<NodeId, FrontendError> {
        let mut lhs = self.unary_expr()?;
        loop {
            let Some(tok) = self.peek() else { break };
            if tok.kind != TokenKind::Op {
                break;
            }
            let Some(prec) = bin_prec(&tok.text) else { break };
            if prec < min_prec {
                break;
            }
            let op = self.bump();
            let rhs = self.binary_expr(prec + 1)?;
            let node = self.ast.alloc(AstKind::BinOp, Span { line: op.line, col: op.col });
            self.ast.set_text(node, op.text);
            self.ast.adopt(node, lhs);
            self.ast.adopt(node, rhs);
            lhs = node;
        }
        Ok(lhs)
    }

    fn token_starts_expr(t: &Token) -> bool {
        match t.kind {
            TokenKind::Ident | TokenKind::IntLit | TokenKind::FloatLit => true,
            TokenKind::Keyword => t.text == "true" || t.text == "false",
            TokenKind::Punct => t.text == "(",
            TokenKind::Op => t.text == "-" || t.text == "!",
        }
    }

    /// Is the current `(` the start of a cast? Basic types decide immediately;
    /// `(RecordName) <expr-start>` is a cast when the name is CamelCase.
    fn at_cast(&self) -> bool {
        if !self.at_punct("(") {
            return false;
        }
        match self.peek_at(1) {
            Some(t) if t.kind == TokenKind::Keyword => {
                matches!(t.text.as_str(), "int" | "float" | "bool")
            }
            Some(t) if t.kind == TokenKind::Ident => {
                t.text.starts_with(|c: char| c.is_ascii_uppercase())
                    && self.peek_at(2).is_some_and(|t| t.is(TokenKind::Punct, ")"))
                    && self.peek_at(3).is_some_and(Self::token_starts_expr)
            }
            _ => false,
        }
    }

    fn unary_expr(&mut self) -> Result<NodeId, FrontendError> {
        if self.at_op("-") || self.at_op("!") {
            let op = self.bump();
            let node = self.ast.alloc(AstKind::UnOp, Span { line: op.line, col: op.col });
            self.ast.set_text(node, op.text);
            let operand = self.unary_expr()?;
            self.ast.adopt(node, operand);
            return Ok(node);
        }
        if self.at_cast() {
            let open = self.bump();
            let target = self.parse_type()?;
            self.expect(TokenKind::Punct, ")")?;
            let node = self.ast.alloc(AstKind::Cast, Span { line: open.line, col: open.col });
            self.ast.set_ty(node, target);
            let operand = self.unary_expr()?;
            self.ast.adopt(node, operand);
            return Ok(node);
        }
        self.postfix_expr()
    }

    fn postfix_expr(&mut self) -> Result<NodeId, FrontendError> {
        let mut base = self.primary_expr()?;
        loop {
            if self.at_punct("[") {
                let open = self.bump();
                let index = self.expr()?;
                self.expect(TokenKind::Punct, "]")?;
                let node = self.ast.alloc(AstKind::ArrayRef, Span { line: open.line, col: open.col });
                self.ast.adopt(node, base);
                self.ast.adopt(node, index);
                base = node;
            } else if self.at_punct(".") {
                let dot = self.bump();
                let field = self.expect_ident("a field name")?;
                let node = self.ast.alloc(AstKind::FieldRef, Span { line: dot.line, col: dot.col });
                self.ast.set_text(node, field.text);
                self.ast.adopt(node, base);
                base = node;
            } else {
                break;
            }
        }
        Ok(base)
    }

    fn primary_expr(&mut self) -> Result<NodeId, FrontendError> {
        let Some(tok) = self.peek() else {
            return Err(self.error("an expression"));
        };
        match tok.kind {
            TokenKind::IntLit => {
                let t = self.bump();
                let node = self.ast.alloc(AstKind::IntConst, Span { line: t.line, col: t.col });
                self.ast.set_text(node, t.text);
                Ok(node)
            }
            TokenKind::FloatLit => {
                let t = self.bump();
                let node = self.ast.alloc(AstKind::FloatConst, Span { line: t.line, col: t.col });
                self.ast.set_text(node, t.text);
                Ok(node)
            }
            TokenKind::Keyword if tok.text == "true" || tok.text == "false" => {
                let t = self.bump();
                let node = self.ast.alloc(AstKind::BoolConst, Span { line: t.line, col: t.col });
                self.ast.set_text(node, t.text);
                Ok(node)
            }
            TokenKind::Punct if tok.text == "(" => {
                self.bump();
                let inner = self.expr()?;
                self.expect(TokenKind::Punct, ")")?;
                Ok(inner)
            }
            TokenKind::Ident => {
                let name = self.bump();
                if self.at_punct("(") {
                    self.bump();
                    let node = self.ast.alloc(AstKind::Invoke, Span { line: name.line, col: name.col });
                    self.ast.set_text(node, name.text);
                    if !self.at_punct(")") {
                        loop {
                            let arg = self.expr()?;
                            self.ast.adopt(node, arg);
                            if self.at_punct(",") {
                                self.bump();
                            } else {
                                break;
                            }
                        }
                    }
                    self.expect(TokenKind::Punct, ")")?;
                    Ok(node)
                } else {
                    let node = self.ast.alloc(AstKind::Local, Span { line: name.line, col: name.col });
                    self.ast.set_text(node, name.text);
                    Ok(node)
                }
            }
            _ => Err(self.error("an expression")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multiplication_binds_tighter_than_addition() {
        let prog = parse_source("int f() { return 1 + 2 * 3; }").unwrap();
        let ast = &prog.ast;
        let func = ast.children(prog.root)[0];
        let body = *ast.children(func).last().unwrap();
        let ret = ast.children(body)[0];
        let add = ast.children(ret)[0];
        assert_eq!(ast.kind(add), AstKind::BinOp);
        assert_eq!(ast.text(add), "+");
        let mul = ast.children(add)[1];
        assert_eq!(ast.kind(mul), AstKind::BinOp);
        assert_eq!(ast.text(mul), "*");
        assert_eq!(ast.text(ast.children(add)[0]), "1");
        assert_eq!(ast.text(ast.children(mul)[0]), "2");
        assert_eq!(ast.text(ast.children(mul)[1]), "3");
    }

    #[test]
    fn truncated_input_is_a_parse_error() {
        let err = parse_source("int f( {").unwrap_err();
        assert!(matches!(err, FrontendError::Parse { .. }));
    }

    #[test]
    fn cast_of_parenthesized_sum() {
        let prog = parse_source("float f(int a, int b) { return (float) (a + b); }").unwrap();
        let ast = &prog.ast;
        let func = ast.children(prog.root)[0];
        let body = *ast.children(func).last().unwrap();
        let ret = ast.children(body)[0];
        let cast = ast.children(ret)[0];
        assert_eq!(ast.kind(cast), AstKind::Cast);
        assert_eq!(ast.ty(cast), Some(&Ty::Float));
        assert_eq!(ast.kind(ast.children(cast)[0]), AstKind::BinOp);
    }

    #[test]
    fn parenthesized_variable_is_not_a_cast() {
        let prog = parse_source("int f(int a) { return (a) + 1; }").unwrap();
        let ast = &prog.ast;
        let func = ast.children(prog.root)[0];
        let body = *ast.children(func).last().unwrap();
        let ret = ast.children(body)[0];
        let add = ast.children(ret)[0];
        assert_eq!(ast.kind(add), AstKind::BinOp);
        assert_eq!(ast.kind(ast.children(add)[0]), AstKind::Local);
    }

    #[test]
    fn record_declaration_with_array_field() {
        let prog = parse_source("type PointList { int n; float data[]; }\nint f() { return 0; }").unwrap();
        let rec = prog.records.get("PointList").unwrap();
        assert_eq!(rec.fields.len(), 2);
        assert_eq!(rec.fields[0], ("n".into(), Ty::Int));
        assert_eq!(rec.fields[1], ("data".into(), Ty::Array(Basic::Float)));
    }

    #[test]
    fn switch_arms_and_negative_labels() {
        let prog = parse_source(
            "int f(int x) { int r = 0; switch (x) { case -1: r = 1; case 2: r = 2; default: r = 3; } return r; }",
        )
        .unwrap();
        let ast = &prog.ast;
        let func = ast.children(prog.root)[0];
        let body = *ast.children(func).last().unwrap();
        let switch = ast.children(body)[1];
        assert_eq!(ast.kind(switch), AstKind::Switch);
        let arms = &ast.children(switch)[1..];
        assert_eq!(arms.len(), 3);
        assert_eq!(ast.text(arms[0]), "-1");
        assert_eq!(ast.kind(arms[2]), AstKind::DefaultArm);
    }

    #[test]
    fn every_node_has_one_parent_except_root() {
        let prog = parse_source("int f(int a) { if (a < 2) { return a; } return f(a - 1); }").unwrap();
        let ast = &prog.ast;
        for id in ast.subtree(prog.root) {
            if id == prog.root {
                assert!(ast.node(id).parent.is_none());
            } else {
                assert!(ast.node(id).parent.is_some(), "{id:?} has no parent");
            }
        }
    }
}
