use super::lexer::{Tok, Token};
use super::{ErrorKind, GenError};

pub type FuncId = usize;

#[derive(Clone, Debug)]
pub enum Expr {
    None,
    Bool(bool),
    Int(i64),
    Str(String),
    Ellipsis,
    Name(String),
    List(Vec<Expr>),
    Tuple(Vec<Expr>),
    Attr(Box<Expr>, String),
    Call(Box<Expr>, Vec<Expr>, usize),
    Index(Box<Expr>, Box<Expr>),
    Slice(Box<Expr>, Option<Box<Expr>>, Option<Box<Expr>>),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Compare(Box<Expr>, Vec<(CmpOp, Expr)>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    IfElse(Box<Expr>, Box<Expr>, Box<Expr>),
    Comprehension {
        elem: Box<Expr>,
        var: Box<Target>,
        iter: Box<Expr>,
        cond: Option<Box<Expr>>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnOp {
    Neg,
    Pos,
    Not,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    FloorDiv,
    Mod,
    Pow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    In,
    NotIn,
    Is,
    IsNot,
}

#[derive(Clone, Debug)]
pub enum Target {
    Name(String),
    Index(Expr, Expr),
    Tuple(Vec<Target>),
}

#[derive(Clone, Debug)]
pub struct Stmt {
    pub line: usize,
    pub kind: StmtKind,
}

#[derive(Clone, Debug)]
pub enum StmtKind {
    Expr(Expr),
    Assign(Vec<Target>, Expr),
    AugAssign(Target, BinOp, Expr),
    If(Vec<(Expr, Vec<Stmt>)>, Option<Vec<Stmt>>),
    While(Expr, Vec<Stmt>),
    For(Target, Expr, Vec<Stmt>),
    Def(FuncId),
    Return(Option<Expr>),
    Global(Vec<String>),
    Break,
    Continue,
    Pass,
}

#[derive(Clone, Debug)]
pub struct FuncDef {
    pub name: String,
    pub params: Vec<Param>,
    pub body: Vec<Stmt>,
    pub line: usize,
    pub globals: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct Param {
    pub name: String,
    pub default: Option<Expr>,
}

/// A parsed generator program. Plain data, shareable across threads.
#[derive(Clone, Debug)]
pub struct Program {
    pub body: Vec<Stmt>,
    pub funcs: Vec<FuncDef>,
}

impl Program {
    /// Top-level function definitions in source order.
    pub fn top_level_defs(&self) -> impl Iterator<Item = &FuncDef> {
        self.body.iter().filter_map(|s| match s.kind {
            StmtKind::Def(id) => Some(&self.funcs[id]),
            _ => None,
        })
    }
}

const KEYWORDS: &[&str] = &[
    "and", "as", "assert", "async", "await", "break", "class", "continue", "def", "del", "elif", "else", "except",
    "finally", "for", "from", "global", "if", "import", "in", "is", "lambda", "nonlocal", "not", "or", "pass",
    "raise", "return", "try", "while", "with", "yield", "True", "False", "None",
];

pub fn parse(tokens: Vec<Token>) -> Result<Program, GenError> {
    let mut p = Parser { toks: tokens, pos: 0, funcs: Vec::new(), global_stack: Vec::new() };
    let mut body = Vec::new();
    while !p.at(&Tok::Eof) {
        if p.eat(&Tok::Newline) {
            continue;
        }
        body.push(p.statement()?);
    }
    Ok(Program { body, funcs: p.funcs })
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    funcs: Vec<FuncDef>,
    global_stack: Vec<Vec<String>>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].tok
    }

    fn line(&self) -> usize {
        self.toks[self.pos].line
    }

    fn at(&self, t: &Tok) -> bool {
        self.peek() == t
    }

    fn at_op(&self, op: &str) -> bool {
        matches!(self.peek(), Tok::Op(o) if *o == op)
    }

    fn at_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Name(n) if n == kw)
    }

    fn advance(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.at(t) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn eat_op(&mut self, op: &str) -> bool {
        if self.at_op(op) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.at_kw(kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, GenError> {
        Err(GenError::new(ErrorKind::Syntax, self.line(), msg))
    }

    fn expect_op(&mut self, op: &str) -> Result<(), GenError> {
        if self.eat_op(op) {
            Ok(())
        } else {
            self.err(format!("expected {op:?}, found {}", describe(self.peek())))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), GenError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.err(format!("expected {kw:?}, found {}", describe(self.peek())))
        }
    }

    fn ident(&mut self) -> Result<String, GenError> {
        match self.peek().clone() {
            Tok::Name(n) if !KEYWORDS.contains(&n.as_str()) => {
                self.advance();
                Ok(n)
            }
            other => self.err(format!("expected identifier, found {}", describe(&other))),
        }
    }

    fn end_of_statement(&mut self) -> Result<(), GenError> {
        if self.eat(&Tok::Newline) || self.at(&Tok::Eof) || self.at(&Tok::Dedent) {
            Ok(())
        } else {
            self.err(format!("expected end of line, found {}", describe(self.peek())))
        }
    }

    fn block(&mut self) -> Result<Vec<Stmt>, GenError> {
        self.expect_op(":")?;
        if !self.eat(&Tok::Newline) {
            // Single-line suite: `if x: y = 1`.
            let mut body = vec![self.simple_statement()?];
            while self.eat_op(";") {
                if self.at(&Tok::Newline) {
                    break;
                }
                body.push(self.simple_statement()?);
            }
            self.end_of_statement()?;
            return Ok(body);
        }
        if !self.eat(&Tok::Indent) {
            return self.err("expected an indented block");
        }
        let mut body = Vec::new();
        while !self.eat(&Tok::Dedent) {
            if self.at(&Tok::Eof) {
                break;
            }
            if self.eat(&Tok::Newline) {
                continue;
            }
            body.push(self.statement()?);
        }
        Ok(body)
    }

    fn statement(&mut self) -> Result<Stmt, GenError> {
        let line = self.line();
        let kind = match self.peek() {
            Tok::Name(n) => match n.as_str() {
                "def" => return self.def(),
                "if" => {
                    self.advance();
                    let mut branches = vec![(self.expr()?, self.block()?)];
                    let mut orelse = None;
                    loop {
                        if self.eat_kw("elif") {
                            branches.push((self.expr()?, self.block()?));
                        } else if self.eat_kw("else") {
                            orelse = Some(self.block()?);
                            break;
                        } else {
                            break;
                        }
                    }
                    StmtKind::If(branches, orelse)
                }
                "while" => {
                    self.advance();
                    let cond = self.expr()?;
                    let body = self.block()?;
                    if self.at_kw("else") {
                        return self.err("while-else is not supported");
                    }
                    StmtKind::While(cond, body)
                }
                "for" => {
                    self.advance();
                    let target = self.target_list()?;
                    self.expect_kw("in")?;
                    let iter = self.expr_list()?;
                    let body = self.block()?;
                    if self.at_kw("else") {
                        return self.err("for-else is not supported");
                    }
                    StmtKind::For(target, iter, body)
                }
                "elif" | "else" => return self.err(format!("'{n}' without matching 'if'")),
                "class" | "try" | "with" | "async" | "lambda" | "yield" | "del" | "raise" | "assert"
                | "nonlocal" | "except" | "finally" => {
                    return self.err(format!("'{n}' is not supported"));
                }
                _ => {
                    let s = self.simple_statement()?;
                    let mut more = Vec::new();
                    while self.eat_op(";") {
                        if self.at(&Tok::Newline) {
                            break;
                        }
                        more.push(self.simple_statement()?);
                    }
                    self.end_of_statement()?;
                    if more.is_empty() {
                        return Ok(s);
                    }
                    more.insert(0, s);
                    StmtKind::If(vec![(Expr::Bool(true), more)], None)
                }
            },
            Tok::Indent => return self.err("unexpected indent"),
            _ => {
                let s = self.simple_statement()?;
                self.end_of_statement()?;
                return Ok(s);
            }
        };
        Ok(Stmt { line, kind })
    }

    fn simple_statement(&mut self) -> Result<Stmt, GenError> {
        let line = self.line();
        let kind = if self.eat_kw("pass") {
            StmtKind::Pass
        } else if self.eat_kw("break") {
            StmtKind::Break
        } else if self.eat_kw("continue") {
            StmtKind::Continue
        } else if self.eat_kw("return") {
            if matches!(self.peek(), Tok::Newline | Tok::Eof | Tok::Dedent) || self.at_op(";") {
                StmtKind::Return(None)
            } else {
                StmtKind::Return(Some(self.expr_list()?))
            }
        } else if self.eat_kw("global") {
            let mut names = vec![self.ident()?];
            while self.eat_op(",") {
                names.push(self.ident()?);
            }
            if let Some(scope) = self.global_stack.last_mut() {
                scope.extend(names.iter().cloned());
            }
            StmtKind::Global(names)
        } else if self.at_kw("import") || self.at_kw("from") {
            // Imports are accepted and ignored; the runtime objects are injected.
            while !matches!(self.peek(), Tok::Newline | Tok::Eof) && !self.at_op(";") {
                self.advance();
            }
            StmtKind::Pass
        } else {
            let first = self.expr_list()?;
            if self.at_op(":") {
                // Annotated assignment: the annotation is ignored.
                self.advance();
                self.expr()?;
                let target = to_target(&first).ok_or_else(|| self.syntax("invalid annotation target"))?;
                if self.eat_op("=") {
                    StmtKind::Assign(vec![target], self.expr_list()?)
                } else {
                    StmtKind::Pass
                }
            } else if self.at_op("=") {
                let mut targets = vec![to_target(&first).ok_or_else(|| self.syntax("cannot assign to expression"))?];
                let mut value;
                loop {
                    self.expect_op("=")?;
                    value = self.expr_list()?;
                    if !self.at_op("=") {
                        break;
                    }
                    targets.push(to_target(&value).ok_or_else(|| self.syntax("cannot assign to expression"))?);
                }
                StmtKind::Assign(targets, value)
            } else if let Some(op) = self.aug_op() {
                self.advance();
                let target = match to_target(&first) {
                    Some(t @ (Target::Name(_) | Target::Index(..))) => t,
                    _ => return self.err("illegal expression for augmented assignment"),
                };
                StmtKind::AugAssign(target, op, self.expr()?)
            } else {
                StmtKind::Expr(first)
            }
        };
        Ok(Stmt { line, kind })
    }

    fn syntax(&self, msg: &str) -> GenError {
        GenError::new(ErrorKind::Syntax, self.line(), msg)
    }

    fn aug_op(&self) -> Option<BinOp> {
        match self.peek() {
            Tok::Op("+=") => Some(BinOp::Add),
            Tok::Op("-=") => Some(BinOp::Sub),
            Tok::Op("*=") => Some(BinOp::Mul),
            Tok::Op("//=") => Some(BinOp::FloorDiv),
            Tok::Op("%=") => Some(BinOp::Mod),
            Tok::Op("**=") => Some(BinOp::Pow),
            _ => None,
        }
    }

    fn def(&mut self) -> Result<Stmt, GenError> {
        let line = self.line();
        self.expect_kw("def")?;
        let name = self.ident()?;
        self.expect_op("(")?;
        let mut params: Vec<Param> = Vec::new();
        while !self.at_op(")") {
            if self.at_op("*") || self.at_op("**") {
                return self.err("variadic parameters are not supported");
            }
            let pname = self.ident()?;
            if self.eat_op(":") {
                self.expr()?;
            }
            let default = if self.eat_op("=") { Some(self.expr()?) } else { None };
            if default.is_none() && params.iter().any(|p| p.default.is_some()) {
                return self.err("non-default argument follows default argument");
            }
            if params.iter().any(|p| p.name == pname) {
                return self.err(format!("duplicate argument {pname:?}"));
            }
            params.push(Param { name: pname, default });
            if !self.eat_op(",") {
                break;
            }
        }
        self.expect_op(")")?;
        if self.eat_op("->") {
            self.expr()?;
        }
        let id = self.funcs.len();
        self.funcs.push(FuncDef { name, params, body: Vec::new(), line, globals: Vec::new() });
        self.global_stack.push(Vec::new());
        let body = self.block();
        let globals = self.global_stack.pop().unwrap_or_default();
        let body = body?;
        self.funcs[id].body = body;
        self.funcs[id].globals = globals;
        Ok(Stmt { line, kind: StmtKind::Def(id) })
    }

    fn target_list(&mut self) -> Result<Target, GenError> {
        let mut items = vec![self.arith()?];
        let mut tuple = false;
        while self.eat_op(",") {
            tuple = true;
            if self.at_kw("in") {
                break;
            }
            items.push(self.arith()?);
        }
        let e = if tuple { Expr::Tuple(items) } else { items.pop().unwrap() };
        to_target(&e).ok_or_else(|| self.syntax("invalid loop target"))
    }

    /// Comma-separated expressions; more than one becomes a tuple.
    fn expr_list(&mut self) -> Result<Expr, GenError> {
        let first = self.expr()?;
        if !self.at_op(",") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat_op(",") {
            if self.at_expr_end() {
                break;
            }
            items.push(self.expr()?);
        }
        Ok(Expr::Tuple(items))
    }

    fn at_expr_end(&self) -> bool {
        matches!(self.peek(), Tok::Newline | Tok::Eof | Tok::Dedent)
            || matches!(self.peek(), Tok::Op(o) if matches!(*o, "=" | ")" | "]" | ":" | ";"))
    }

    fn expr(&mut self) -> Result<Expr, GenError> {
        if self.at_kw("lambda") {
            return self.err("lambda is not supported");
        }
        let e = self.or_expr()?;
        if self.at_kw("if") && !self.in_comprehension_cond() {
            self.advance();
            let cond = self.or_expr()?;
            self.expect_kw("else")?;
            let other = self.expr()?;
            return Ok(Expr::IfElse(Box::new(cond), Box::new(e), Box::new(other)));
        }
        Ok(e)
    }

    // `x if c else y` needs an `else`; comprehension filters do not have one.
    fn in_comprehension_cond(&self) -> bool {
        let mut depth = 0i32;
        let mut n = 1;
        loop {
            match self.peek_at(n) {
                Tok::Name(k) if k == "else" && depth == 0 => return false,
                Tok::Op("(" | "[" | "{") => depth += 1,
                Tok::Op(")" | "]" | "}") => {
                    if depth == 0 {
                        return true;
                    }
                    depth -= 1;
                }
                Tok::Name(k) if k == "for" && depth == 0 => return true,
                Tok::Newline | Tok::Eof => return true,
                _ => {}
            }
            n += 1;
        }
    }

    fn or_expr(&mut self) -> Result<Expr, GenError> {
        let mut e = self.and_expr()?;
        while self.eat_kw("or") {
            e = Expr::Or(Box::new(e), Box::new(self.and_expr()?));
        }
        Ok(e)
    }

    fn and_expr(&mut self) -> Result<Expr, GenError> {
        let mut e = self.not_expr()?;
        while self.eat_kw("and") {
            e = Expr::And(Box::new(e), Box::new(self.not_expr()?));
        }
        Ok(e)
    }

    fn not_expr(&mut self) -> Result<Expr, GenError> {
        if self.eat_kw("not") {
            return Ok(Expr::Unary(UnOp::Not, Box::new(self.not_expr()?)));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Expr, GenError> {
        let first = self.arith()?;
        let mut rest = Vec::new();
        loop {
            let op = match self.peek() {
                Tok::Op("==") => CmpOp::Eq,
                Tok::Op("!=") => CmpOp::Ne,
                Tok::Op("<") => CmpOp::Lt,
                Tok::Op("<=") => CmpOp::Le,
                Tok::Op(">") => CmpOp::Gt,
                Tok::Op(">=") => CmpOp::Ge,
                Tok::Name(k) if k == "in" => CmpOp::In,
                Tok::Name(k) if k == "is" => {
                    if matches!(self.peek_at(1), Tok::Name(n) if n == "not") {
                        self.advance();
                        CmpOp::IsNot
                    } else {
                        CmpOp::Is
                    }
                }
                Tok::Name(k) if k == "not" && matches!(self.peek_at(1), Tok::Name(n) if n == "in") => {
                    self.advance();
                    CmpOp::NotIn
                }
                _ => break,
            };
            self.advance();
            rest.push((op, self.arith()?));
        }
        if rest.is_empty() {
            Ok(first)
        } else {
            Ok(Expr::Compare(Box::new(first), rest))
        }
    }

    fn arith(&mut self) -> Result<Expr, GenError> {
        let mut e = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Op("+") => BinOp::Add,
                Tok::Op("-") => BinOp::Sub,
                Tok::Op("&" | "|" | "^") => return self.err("bitwise operators are not supported"),
                _ => break,
            };
            self.advance();
            e = Expr::Binary(op, Box::new(e), Box::new(self.term()?));
        }
        Ok(e)
    }

    fn term(&mut self) -> Result<Expr, GenError> {
        let mut e = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Op("*") => BinOp::Mul,
                Tok::Op("/") => BinOp::Div,
                Tok::Op("//") => BinOp::FloorDiv,
                Tok::Op("%") => BinOp::Mod,
                _ => break,
            };
            self.advance();
            e = Expr::Binary(op, Box::new(e), Box::new(self.unary()?));
        }
        Ok(e)
    }

    fn unary(&mut self) -> Result<Expr, GenError> {
        if self.eat_op("-") {
            return Ok(Expr::Unary(UnOp::Neg, Box::new(self.unary()?)));
        }
        if self.eat_op("+") {
            return Ok(Expr::Unary(UnOp::Pos, Box::new(self.unary()?)));
        }
        if self.at_op("~") {
            return self.err("bitwise operators are not supported");
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, GenError> {
        let base = self.postfix()?;
        if self.eat_op("**") {
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn postfix(&mut self) -> Result<Expr, GenError> {
        let mut e = self.atom()?;
        loop {
            if self.eat_op(".") {
                let name = self.ident()?;
                e = Expr::Attr(Box::new(e), name);
            } else if self.at_op("(") {
                let line = self.line();
                self.advance();
                let args = self.call_args()?;
                e = Expr::Call(Box::new(e), args, line);
            } else if self.eat_op("[") {
                e = self.subscript(e)?;
            } else {
                return Ok(e);
            }
        }
    }

    fn call_args(&mut self) -> Result<Vec<Expr>, GenError> {
        let mut args = Vec::new();
        while !self.at_op(")") {
            if matches!(self.peek(), Tok::Name(_)) && matches!(self.peek_at(1), Tok::Op("=")) {
                return self.err("keyword arguments are not supported");
            }
            if self.at_op("*") || self.at_op("**") {
                return self.err("argument unpacking is not supported");
            }
            let arg = self.expr()?;
            if self.at_kw("for") {
                // Bare generator expression as the sole argument.
                let comp = self.comprehension(arg)?;
                args.push(comp);
                break;
            }
            args.push(arg);
            if !self.eat_op(",") {
                break;
            }
        }
        self.expect_op(")")?;
        Ok(args)
    }

    fn comprehension(&mut self, elem: Expr) -> Result<Expr, GenError> {
        self.expect_kw("for")?;
        let var = self.target_list()?;
        self.expect_kw("in")?;
        let iter = self.or_expr()?;
        let cond = if self.eat_kw("if") { Some(Box::new(self.or_expr()?)) } else { None };
        if self.at_kw("for") {
            return self.err("nested comprehensions are not supported");
        }
        Ok(Expr::Comprehension { elem: Box::new(elem), var: Box::new(var), iter: Box::new(iter), cond })
    }

    fn subscript(&mut self, base: Expr) -> Result<Expr, GenError> {
        let lo = if self.at_op(":") { None } else { Some(Box::new(self.expr()?)) };
        if self.eat_op(":") {
            let hi = if self.at_op("]") || self.at_op(":") { None } else { Some(Box::new(self.expr()?)) };
            if self.eat_op(":") && !self.at_op("]") {
                return self.err("slice steps are not supported");
            }
            self.expect_op("]")?;
            let lo = lo.unwrap_or_else(|| Box::new(Expr::None));
            return Ok(Expr::Slice(Box::new(base), Some(lo), hi));
        }
        self.expect_op("]")?;
        match lo {
            Some(idx) => Ok(Expr::Index(Box::new(base), idx)),
            None => self.err("empty subscript"),
        }
    }

    fn atom(&mut self) -> Result<Expr, GenError> {
        match self.advance() {
            Tok::Int(v) => Ok(Expr::Int(v)),
            Tok::Str(mut s) => {
                while let Tok::Str(next) = self.peek().clone() {
                    s.push_str(&next);
                    self.advance();
                }
                Ok(Expr::Str(s))
            }
            Tok::Op("...") => Ok(Expr::Ellipsis),
            Tok::Op("(") => {
                if self.eat_op(")") {
                    return Ok(Expr::Tuple(Vec::new()));
                }
                let first = self.expr()?;
                if self.at_kw("for") {
                    let comp = self.comprehension(first)?;
                    self.expect_op(")")?;
                    return Ok(comp);
                }
                if self.eat_op(")") {
                    return Ok(first);
                }
                let mut items = vec![first];
                while self.eat_op(",") {
                    if self.at_op(")") {
                        break;
                    }
                    items.push(self.expr()?);
                }
                self.expect_op(")")?;
                Ok(Expr::Tuple(items))
            }
            Tok::Op("[") => {
                if self.eat_op("]") {
                    return Ok(Expr::List(Vec::new()));
                }
                let first = self.expr()?;
                if self.at_kw("for") {
                    let comp = self.comprehension(first)?;
                    self.expect_op("]")?;
                    return Ok(comp);
                }
                let mut items = vec![first];
                while self.eat_op(",") {
                    if self.at_op("]") {
                        break;
                    }
                    items.push(self.expr()?);
                }
                self.expect_op("]")?;
                Ok(Expr::List(items))
            }
            Tok::Op("{") => {
                self.pos -= 1;
                self.err("dict and set literals are not supported")
            }
            Tok::Name(n) => match n.as_str() {
                "True" => Ok(Expr::Bool(true)),
                "False" => Ok(Expr::Bool(false)),
                "None" => Ok(Expr::None),
                k if KEYWORDS.contains(&k) => {
                    self.pos -= 1;
                    self.err(format!("unexpected keyword {k:?}"))
                }
                _ => Ok(Expr::Name(n)),
            },
            other => {
                self.pos = self.pos.saturating_sub(1);
                self.err(format!("unexpected {}", describe(&other)))
            }
        }
    }
}

fn to_target(e: &Expr) -> Option<Target> {
    match e {
        Expr::Name(n) => Some(Target::Name(n.clone())),
        Expr::Index(b, i) => Some(Target::Index((**b).clone(), (**i).clone())),
        Expr::Tuple(items) | Expr::List(items) => items.iter().map(to_target).collect::<Option<Vec<_>>>().map(Target::Tuple),
        _ => None,
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Name(n) => format!("{n:?}"),
        Tok::Int(v) => v.to_string(),
        Tok::Str(_) => "string literal".into(),
        Tok::Op(o) => format!("{o:?}"),
        Tok::Newline => "end of line".into(),
        Tok::Indent => "indent".into(),
        Tok::Dedent => "dedent".into(),
        Tok::Eof => "end of input".into(),
    }
}
