use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::rc::Rc;
use std::time::Instant;

use super::parser::{BinOp, CmpOp, Expr, FuncId, Program, Stmt, StmtKind, Target, UnOp};
use super::{ChoiceSource, ErrorKind, GenError, Limits};

type R<T> = Result<T, GenError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Builtin {
    Len,
    Range,
    Str,
    Int,
    Chr,
    Ord,
    Abs,
    Min,
    Max,
    Print,
    Bool,
    List,
    Sum,
    Repr,
}

impl Builtin {
    fn lookup(name: &str) -> Option<Builtin> {
        Some(match name {
            "len" => Builtin::Len,
            "range" => Builtin::Range,
            "str" => Builtin::Str,
            "int" => Builtin::Int,
            "chr" => Builtin::Chr,
            "ord" => Builtin::Ord,
            "abs" => Builtin::Abs,
            "min" => Builtin::Min,
            "max" => Builtin::Max,
            "print" => Builtin::Print,
            "bool" => Builtin::Bool,
            "list" => Builtin::List,
            "sum" => Builtin::Sum,
            "repr" => Builtin::Repr,
            _ => return None,
        })
    }
}

#[derive(Clone)]
enum Value {
    None,
    Bool(bool),
    Int(i64),
    Str(Rc<str>),
    List(Rc<RefCell<Vec<Value>>>),
    Tuple(Rc<Vec<Value>>),
    Range(i64, i64, i64),
    Func(FuncId),
    Builtin(Builtin),
    Random,
    Output,
    Method(Box<Value>, Rc<str>),
    Ellipsis,
}

impl Value {
    fn type_name(&self) -> &'static str {
        match self {
            Value::None => "NoneType",
            Value::Bool(_) => "bool",
            Value::Int(_) => "int",
            Value::Str(_) => "str",
            Value::List(_) => "list",
            Value::Tuple(_) => "tuple",
            Value::Range(..) => "range",
            Value::Func(_) => "function",
            Value::Builtin(_) => "builtin_function_or_method",
            Value::Random => "Random",
            Value::Output => "TextIO",
            Value::Method(..) => "method",
            Value::Ellipsis => "ellipsis",
        }
    }

    fn str(s: &str) -> Value {
        Value::Str(Rc::from(s))
    }

    fn list(items: Vec<Value>) -> Value {
        Value::List(Rc::new(RefCell::new(items)))
    }

    fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(v) => Some(*v),
            Value::Bool(b) => Some(*b as i64),
            _ => None,
        }
    }
}

fn range_len(start: i64, stop: i64, step: i64) -> i64 {
    let (start, stop, step) = (start as i128, stop as i128, step as i128);
    let n = if step > 0 && start < stop {
        (stop - start - 1) / step + 1
    } else if step < 0 && start > stop {
        (start - stop - 1) / (-step) + 1
    } else {
        0
    };
    n.min(i64::MAX as i128) as i64
}

fn truthy(v: &Value) -> bool {
    match v {
        Value::None => false,
        Value::Bool(b) => *b,
        Value::Int(i) => *i != 0,
        Value::Str(s) => !s.is_empty(),
        Value::List(l) => !l.borrow().is_empty(),
        Value::Tuple(t) => !t.is_empty(),
        Value::Range(a, b, s) => range_len(*a, *b, *s) > 0,
        _ => true,
    }
}

fn py_eq(a: &Value, b: &Value) -> bool {
    if let (Some(x), Some(y)) = (a.as_int(), b.as_int()) {
        return x == y;
    }
    match (a, b) {
        (Value::None, Value::None) | (Value::Random, Value::Random) | (Value::Output, Value::Output) => true,
        (Value::Ellipsis, Value::Ellipsis) => true,
        (Value::Str(x), Value::Str(y)) => x == y,
        (Value::List(x), Value::List(y)) => {
            let (x, y) = (x.borrow(), y.borrow());
            x.len() == y.len() && x.iter().zip(y.iter()).all(|(p, q)| py_eq(p, q))
        }
        (Value::Tuple(x), Value::Tuple(y)) => x.len() == y.len() && x.iter().zip(y.iter()).all(|(p, q)| py_eq(p, q)),
        (Value::Range(a1, b1, s1), Value::Range(a2, b2, s2)) => (a1, b1, s1) == (a2, b2, s2),
        (Value::Func(x), Value::Func(y)) => x == y,
        (Value::Builtin(x), Value::Builtin(y)) => x == y,
        _ => false,
    }
}

fn repr_str(s: &str) -> String {
    let mut out = String::from("'");
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\'' => out.push_str("\\'"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if (c as u32) < 0x20 || c as u32 == 0x7f => out.push_str(&format!("\\x{:02x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('\'');
    out
}

fn to_str(v: &Value, repr: bool) -> String {
    match v {
        Value::None => "None".into(),
        Value::Bool(true) => "True".into(),
        Value::Bool(false) => "False".into(),
        Value::Int(i) => i.to_string(),
        Value::Str(s) if repr => repr_str(s),
        Value::Str(s) => s.to_string(),
        Value::List(l) => {
            let items: Vec<String> = l.borrow().iter().map(|x| to_str(x, true)).collect();
            format!("[{}]", items.join(", "))
        }
        Value::Tuple(t) => {
            let items: Vec<String> = t.iter().map(|x| to_str(x, true)).collect();
            if items.len() == 1 {
                format!("({},)", items[0])
            } else {
                format!("({})", items.join(", "))
            }
        }
        Value::Range(a, b, 1) => format!("range({a}, {b})"),
        Value::Range(a, b, s) => format!("range({a}, {b}, {s})"),
        Value::Ellipsis => "Ellipsis".into(),
        other => format!("<{}>", other.type_name()),
    }
}

enum Flow {
    Normal,
    Break,
    Continue,
    Return(Value),
}

struct Frame {
    func: Option<FuncId>,
    locals: HashMap<String, Value>,
}

pub struct Interp<'p> {
    prog: &'p Program,
    globals: HashMap<String, Value>,
    defaults: HashMap<FuncId, Vec<Option<Value>>>,
    limits: Limits,
    fuel: u64,
    depth: usize,
    line: usize,
    source: Option<ChoiceSource>,
    out: Vec<u8>,
    entry: FuncId,
    entry_args: usize,
}

impl<'p> Interp<'p> {
    pub fn new(prog: &'p Program, constants: &BTreeMap<String, i64>, limits: Limits) -> R<Self> {
        let mut it = Interp {
            prog,
            globals: constants.iter().map(|(k, v)| (k.clone(), Value::Int(*v))).collect(),
            defaults: HashMap::new(),
            fuel: limits.fuel,
            limits,
            depth: 0,
            line: 1,
            source: None,
            out: Vec::new(),
            entry: 0,
            entry_args: 0,
        };
        let name = super::entry_point(prog)
            .ok_or_else(|| GenError::new(ErrorKind::Name, 1, "no generator function defined"))?
            .to_string();
        let mut frame = Frame { func: None, locals: HashMap::new() };
        match it.exec_block(&prog.body, &mut frame)? {
            Flow::Normal => {}
            _ => return Err(it.err(ErrorKind::Syntax, "'return', 'break' or 'continue' outside function")),
        }
        let Some(Value::Func(id)) = it.globals.get(&name).cloned() else {
            return Err(GenError::new(ErrorKind::Name, 1, format!("{name:?} is not a function")));
        };
        let def = &prog.funcs[id];
        let required = def.params.iter().filter(|p| p.default.is_none()).count();
        if required > 2 {
            return Err(GenError::new(
                ErrorKind::Type,
                def.line,
                format!("generator {name:?} takes {required} required arguments; at most 2 are supplied"),
            ));
        }
        it.entry = id;
        it.entry_args = def.params.len().min(2);
        Ok(it)
    }

    pub fn entry_name(&self) -> &str {
        &self.prog.funcs[self.entry].name
    }

    pub fn set_deadline(&mut self, deadline: Option<Instant>) {
        self.limits.deadline = deadline;
    }

    pub fn generate(&mut self, source: ChoiceSource) -> R<Vec<u8>> {
        self.fuel = self.limits.fuel;
        self.depth = 0;
        self.out.clear();
        self.source = Some(source);
        let args: Vec<Value> = [Value::Random, Value::Output][..self.entry_args].to_vec();
        let result = self.call_func(self.entry, args);
        self.source = None;
        let ret = result?;
        if self.entry_args == 2 {
            if self.out.is_empty() {
                if let Value::Str(s) = ret {
                    return Ok(s.as_bytes().to_vec());
                }
            }
            return Ok(std::mem::take(&mut self.out));
        }
        match ret {
            Value::Str(s) => Ok(s.as_bytes().to_vec()),
            other => Err(self.err(
                ErrorKind::Type,
                format!("generator returned {}, expected str", other.type_name()),
            )),
        }
    }

    fn err(&self, kind: ErrorKind, msg: impl Into<String>) -> GenError {
        GenError::new(kind, self.line, msg)
    }

    fn tick(&mut self) -> R<()> {
        if self.fuel == 0 {
            return Err(self.err(ErrorKind::Timeout, "step budget exhausted"));
        }
        self.fuel -= 1;
        if self.fuel.is_multiple_of(1024) {
            if let Some(d) = self.limits.deadline {
                if Instant::now() >= d {
                    return Err(self.err(ErrorKind::Timeout, "deadline exceeded"));
                }
            }
        }
        Ok(())
    }

    fn check_size(&self, n: usize) -> R<()> {
        if n > self.limits.max_size {
            Err(self.err(ErrorKind::Memory, format!("object of size {n} exceeds the {} limit", self.limits.max_size)))
        } else {
            Ok(())
        }
    }

    fn exec_block(&mut self, body: &'p [Stmt], f: &mut Frame) -> R<Flow> {
        for s in body {
            match self.exec(s, f)? {
                Flow::Normal => {}
                flow => return Ok(flow),
            }
        }
        Ok(Flow::Normal)
    }

    fn exec(&mut self, s: &'p Stmt, f: &mut Frame) -> R<Flow> {
        self.line = s.line;
        self.tick()?;
        match &s.kind {
            StmtKind::Expr(e) => {
                self.eval(e, f)?;
            }
            StmtKind::Assign(targets, value) => {
                let v = self.eval(value, f)?;
                for t in targets {
                    self.assign(t, v.clone(), f)?;
                }
            }
            StmtKind::AugAssign(target, op, value) => self.exec_aug(target, *op, value, f)?,
            StmtKind::If(branches, orelse) => return self.exec_if(s.line, branches, orelse.as_deref(), f),
            StmtKind::While(cond, body) => return self.exec_while(s.line, cond, body, f),
            StmtKind::For(target, iter, body) => return self.exec_for(s.line, target, iter, body, f),
            StmtKind::Def(id) => self.exec_def(*id, f)?,
            StmtKind::Return(e) => {
                if f.func.is_none() {
                    return Err(self.err(ErrorKind::Syntax, "'return' outside function"));
                }
                let v = match e {
                    Some(e) => self.eval(e, f)?,
                    None => Value::None,
                };
                return Ok(Flow::Return(v));
            }
            StmtKind::Global(_) | StmtKind::Pass => {}
            StmtKind::Break => return Ok(Flow::Break),
            StmtKind::Continue => return Ok(Flow::Continue),
        }
        Ok(Flow::Normal)
    }

    #[inline(never)]
    fn exec_aug(&mut self, target: &'p Target, op: BinOp, value: &'p Expr, f: &mut Frame) -> R<()> {
        match target {
            Target::Name(n) => {
                let cur = self.lookup(n, f)?;
                let rhs = self.eval(value, f)?;
                let new = self.binary_inplace(op, cur, rhs)?;
                self.store(n, new, f);
            }
            Target::Index(obj, idx) => {
                let obj = self.eval(obj, f)?;
                let idx = self.eval(idx, f)?;
                let cur = self.index(&obj, &idx)?;
                let rhs = self.eval(value, f)?;
                let new = self.binary(op, cur, rhs)?;
                self.set_index(&obj, &idx, new)?;
            }
            Target::Tuple(_) => return Err(self.err(ErrorKind::Syntax, "illegal augmented assignment")),
        }
        Ok(())
    }

    #[inline(never)]
    fn exec_if(
        &mut self,
        line: usize,
        branches: &'p [(Expr, Vec<Stmt>)],
        orelse: Option<&'p [Stmt]>,
        f: &mut Frame,
    ) -> R<Flow> {
        for (cond, body) in branches {
            let c = self.eval(cond, f)?;
            if truthy(&c) {
                return self.exec_block(body, f);
            }
            self.line = line;
        }
        match orelse {
            Some(body) => self.exec_block(body, f),
            None => Ok(Flow::Normal),
        }
    }

    #[inline(never)]
    fn exec_while(&mut self, line: usize, cond: &'p Expr, body: &'p [Stmt], f: &mut Frame) -> R<Flow> {
        loop {
            self.line = line;
            let c = self.eval(cond, f)?;
            if !truthy(&c) {
                return Ok(Flow::Normal);
            }
            match self.exec_block(body, f)? {
                Flow::Break => return Ok(Flow::Normal),
                Flow::Return(v) => return Ok(Flow::Return(v)),
                Flow::Normal | Flow::Continue => {}
            }
        }
    }

    #[inline(never)]
    fn exec_for(
        &mut self,
        line: usize,
        target: &'p Target,
        iter: &'p Expr,
        body: &'p [Stmt],
        f: &mut Frame,
    ) -> R<Flow> {
        let it = self.eval(iter, f)?;
        let (items, range) = match it {
            Value::Range(start, stop, step) => (Vec::new(), Some((start, step, range_len(start, stop, step)))),
            other => (self.iterate(&other)?, None),
        };
        let n = range.map_or(items.len() as i64, |r| r.2);
        let mut items = items.into_iter();
        for k in 0..n {
            self.line = line;
            self.tick()?;
            let item = match range {
                Some((start, step, _)) => Value::Int(start + k * step),
                None => items.next().unwrap_or(Value::None),
            };
            self.assign(target, item, f)?;
            match self.exec_block(body, f)? {
                Flow::Break => break,
                Flow::Return(v) => return Ok(Flow::Return(v)),
                Flow::Normal | Flow::Continue => {}
            }
        }
        Ok(Flow::Normal)
    }

    #[inline(never)]
    fn exec_def(&mut self, id: FuncId, f: &mut Frame) -> R<()> {
        let def = &self.prog.funcs[id];
        let mut defaults = Vec::with_capacity(def.params.len());
        for p in &def.params {
            defaults.push(match &p.default {
                Some(e) => Some(self.eval(e, f)?),
                None => None,
            });
        }
        self.defaults.insert(id, defaults);
        self.store(&def.name, Value::Func(id), f);
        Ok(())
    }

    fn is_global(&self, name: &str, f: &Frame) -> bool {
        match f.func {
            None => true,
            Some(id) => self.prog.funcs[id].globals.iter().any(|g| g == name),
        }
    }

    fn store(&mut self, name: &str, v: Value, f: &mut Frame) {
        if self.is_global(name, f) {
            self.globals.insert(name.to_string(), v);
        } else {
            f.locals.insert(name.to_string(), v);
        }
    }

    fn lookup(&self, name: &str, f: &Frame) -> R<Value> {
        if f.func.is_some() && !self.is_global(name, f) {
            if let Some(v) = f.locals.get(name) {
                return Ok(v.clone());
            }
        }
        if let Some(v) = self.globals.get(name) {
            return Ok(v.clone());
        }
        if let Some(b) = Builtin::lookup(name) {
            return Ok(Value::Builtin(b));
        }
        Err(self.err(ErrorKind::Name, format!("name {name:?} is not defined")))
    }

    fn assign(&mut self, t: &'p Target, v: Value, f: &mut Frame) -> R<()> {
        match t {
            Target::Name(n) => {
                self.store(n, v, f);
                Ok(())
            }
            Target::Index(obj, idx) => {
                let obj = self.eval(obj, f)?;
                let idx = self.eval(idx, f)?;
                self.set_index(&obj, &idx, v)
            }
            Target::Tuple(ts) => {
                let items = self.iterate(&v)?;
                if items.len() != ts.len() {
                    return Err(self.err(
                        ErrorKind::Value,
                        format!("expected {} values to unpack, got {}", ts.len(), items.len()),
                    ));
                }
                for (t, item) in ts.iter().zip(items) {
                    self.assign(t, item, f)?;
                }
                Ok(())
            }
        }
    }

    fn iterate(&mut self, v: &Value) -> R<Vec<Value>> {
        Ok(match v {
            Value::Str(s) => s.chars().map(|c| Value::str(c.encode_utf8(&mut [0; 4]))).collect(),
            Value::List(l) => l.borrow().clone(),
            Value::Tuple(t) => t.as_ref().clone(),
            Value::Range(a, b, s) => {
                let n = range_len(*a, *b, *s);
                self.check_size(n as usize)?;
                (0..n).map(|k| Value::Int(a + k * s)).collect()
            }
            other => return Err(self.err(ErrorKind::Type, format!("'{}' object is not iterable", other.type_name()))),
        })
    }

    fn eval(&mut self, e: &'p Expr, f: &mut Frame) -> R<Value> {
        match e {
            Expr::None => Ok(Value::None),
            Expr::Bool(b) => Ok(Value::Bool(*b)),
            Expr::Int(i) => Ok(Value::Int(*i)),
            Expr::Str(s) => Ok(Value::str(s)),
            Expr::Ellipsis => Ok(Value::Ellipsis),
            Expr::Name(n) => self.lookup(n, f),
            Expr::List(items) => Ok(Value::list(self.eval_all(items, f)?)),
            Expr::Tuple(items) => Ok(Value::Tuple(Rc::new(self.eval_all(items, f)?))),
            Expr::Attr(obj, name) => self.eval_attr(obj, name, f),
            Expr::Call(callee, args, line) => self.eval_call(callee, args, *line, f),
            Expr::Index(obj, idx) => {
                let o = self.eval(obj, f)?;
                let i = self.eval(idx, f)?;
                self.index(&o, &i)
            }
            Expr::Slice(obj, lo, hi) => self.eval_slice(obj, lo.as_deref(), hi.as_deref(), f),
            Expr::Unary(op, x) => self.eval_unary(*op, x, f),
            Expr::Binary(op, a, b) => {
                let x = self.eval(a, f)?;
                let y = self.eval(b, f)?;
                self.binary(*op, x, y)
            }
            Expr::Compare(first, rest) => self.eval_compare(first, rest, f),
            Expr::And(a, b) => {
                let x = self.eval(a, f)?;
                if truthy(&x) {
                    self.eval(b, f)
                } else {
                    Ok(x)
                }
            }
            Expr::Or(a, b) => {
                let x = self.eval(a, f)?;
                if truthy(&x) {
                    Ok(x)
                } else {
                    self.eval(b, f)
                }
            }
            Expr::IfElse(cond, a, b) => {
                let c = self.eval(cond, f)?;
                if truthy(&c) {
                    self.eval(a, f)
                } else {
                    self.eval(b, f)
                }
            }
            Expr::Comprehension { elem, var, iter, cond } => self.eval_comprehension(elem, var, iter, cond.as_deref(), f),
        }
    }

    #[inline(never)]
    fn eval_all(&mut self, items: &'p [Expr], f: &mut Frame) -> R<Vec<Value>> {
        let mut out = Vec::with_capacity(items.len());
        for i in items {
            out.push(self.eval(i, f)?);
        }
        Ok(out)
    }

    #[inline(never)]
    fn eval_attr(&mut self, obj: &'p Expr, name: &str, f: &mut Frame) -> R<Value> {
        let o = self.eval(obj, f)?;
        if !has_method(&o, name) {
            return Err(self.no_attr(&o, name));
        }
        Ok(Value::Method(Box::new(o), Rc::from(name)))
    }

    #[inline(never)]
    fn eval_call(&mut self, callee: &'p Expr, args: &'p [Expr], line: usize, f: &mut Frame) -> R<Value> {
        let callee_v = match callee {
            Expr::Attr(obj, name) => {
                let o = self.eval(obj, f)?;
                Value::Method(Box::new(o), Rc::from(name.as_str()))
            }
            other => self.eval(other, f)?,
        };
        let argv = self.eval_all(args, f)?;
        self.line = line;
        self.tick()?;
        self.call(callee_v, argv)
    }

    #[inline(never)]
    fn eval_slice(&mut self, obj: &'p Expr, lo: Option<&'p Expr>, hi: Option<&'p Expr>, f: &mut Frame) -> R<Value> {
        let o = self.eval(obj, f)?;
        let lo = match lo {
            Some(e) => self.eval(e, f)?,
            None => Value::None,
        };
        let hi = match hi {
            Some(e) => self.eval(e, f)?,
            None => Value::None,
        };
        self.slice(&o, &lo, &hi)
    }

    #[inline(never)]
    fn eval_unary(&mut self, op: UnOp, x: &'p Expr, f: &mut Frame) -> R<Value> {
        let v = self.eval(x, f)?;
        match op {
            UnOp::Not => Ok(Value::Bool(!truthy(&v))),
            UnOp::Neg | UnOp::Pos => {
                let i = v.as_int().ok_or_else(|| {
                    let sym = if op == UnOp::Neg { "-" } else { "+" };
                    self.err(ErrorKind::Type, format!("bad operand type for unary {sym}: '{}'", v.type_name()))
                })?;
                if op == UnOp::Pos {
                    return Ok(Value::Int(i));
                }
                Ok(Value::Int(i.checked_neg().ok_or_else(|| self.overflow())?))
            }
        }
    }

    #[inline(never)]
    fn eval_compare(&mut self, first: &'p Expr, rest: &'p [(CmpOp, Expr)], f: &mut Frame) -> R<Value> {
        let mut left = self.eval(first, f)?;
        for (op, rhs) in rest {
            let right = self.eval(rhs, f)?;
            if !self.compare(*op, &left, &right)? {
                return Ok(Value::Bool(false));
            }
            left = right;
        }
        Ok(Value::Bool(true))
    }

    #[inline(never)]
    fn eval_comprehension(
        &mut self,
        elem: &'p Expr,
        var: &'p Target,
        iter: &'p Expr,
        cond: Option<&'p Expr>,
        f: &mut Frame,
    ) -> R<Value> {
        let it = self.eval(iter, f)?;
        let items = self.iterate(&it)?;
        let mut out = Vec::new();
        for item in items {
            self.tick()?;
            self.assign(var, item, f)?;
            if let Some(c) = cond {
                let c = self.eval(c, f)?;
                if !truthy(&c) {
                    continue;
                }
            }
            out.push(self.eval(elem, f)?);
            self.check_size(out.len())?;
        }
        Ok(Value::list(out))
    }

    fn norm_index(&self, i: &Value, len: usize) -> R<usize> {
        let i = i
            .as_int()
            .ok_or_else(|| self.err(ErrorKind::Type, format!("indices must be integers, not {}", i.type_name())))?;
        let idx = if i < 0 { i + len as i64 } else { i };
        if idx < 0 || idx >= len as i64 {
            return Err(self.err(ErrorKind::Index, "index out of range"));
        }
        Ok(idx as usize)
    }

    fn index(&self, o: &Value, i: &Value) -> R<Value> {
        match o {
            Value::Str(s) => {
                let n = s.chars().count();
                let k = self.norm_index(i, n)?;
                let c = s.chars().nth(k).unwrap();
                Ok(Value::str(c.encode_utf8(&mut [0; 4])))
            }
            Value::List(l) => {
                let l = l.borrow();
                let k = self.norm_index(i, l.len())?;
                Ok(l[k].clone())
            }
            Value::Tuple(t) => {
                let k = self.norm_index(i, t.len())?;
                Ok(t[k].clone())
            }
            Value::Range(a, b, s) => {
                let k = self.norm_index(i, range_len(*a, *b, *s) as usize)?;
                Ok(Value::Int(a + k as i64 * s))
            }
            other => Err(self.err(ErrorKind::Type, format!("'{}' object is not subscriptable", other.type_name()))),
        }
    }

    fn set_index(&self, o: &Value, i: &Value, v: Value) -> R<()> {
        match o {
            Value::List(l) => {
                let mut l = l.borrow_mut();
                let k = self.norm_index(i, l.len())?;
                l[k] = v;
                Ok(())
            }
            other => Err(self.err(
                ErrorKind::Type,
                format!("'{}' object does not support item assignment", other.type_name()),
            )),
        }
    }

    fn slice_bounds(&self, lo: &Value, hi: &Value, len: usize) -> R<(usize, usize)> {
        let clamp = |v: &Value, default: usize| -> R<usize> {
            match v {
                Value::None => Ok(default),
                v => {
                    let i = v.as_int().ok_or_else(|| self.err(ErrorKind::Type, "slice indices must be integers"))?;
                    let i = if i < 0 { i + len as i64 } else { i };
                    Ok(i.clamp(0, len as i64) as usize)
                }
            }
        };
        let a = clamp(lo, 0)?;
        let b = clamp(hi, len)?;
        Ok((a, b.max(a)))
    }

    fn slice(&self, o: &Value, lo: &Value, hi: &Value) -> R<Value> {
        match o {
            Value::Str(s) => {
                let chars: Vec<char> = s.chars().collect();
                let (a, b) = self.slice_bounds(lo, hi, chars.len())?;
                Ok(Value::str(&chars[a..b].iter().collect::<String>()))
            }
            Value::List(l) => {
                let l = l.borrow();
                let (a, b) = self.slice_bounds(lo, hi, l.len())?;
                Ok(Value::list(l[a..b].to_vec()))
            }
            Value::Tuple(t) => {
                let (a, b) = self.slice_bounds(lo, hi, t.len())?;
                Ok(Value::Tuple(Rc::new(t[a..b].to_vec())))
            }
            other => Err(self.err(ErrorKind::Type, format!("'{}' object is not subscriptable", other.type_name()))),
        }
    }

    fn overflow(&self) -> GenError {
        self.err(ErrorKind::Overflow, "integer overflow")
    }

    /// `+=` on lists extends in place, as in Python.
    fn binary_inplace(&mut self, op: BinOp, a: Value, b: Value) -> R<Value> {
        if let (BinOp::Add, Value::List(l)) = (op, &a) {
            let extra = self.iterate(&b)?;
            let new_len = l.borrow().len() + extra.len();
            self.check_size(new_len)?;
            l.borrow_mut().extend(extra);
            return Ok(a);
        }
        self.binary(op, a, b)
    }

    fn binary(&self, op: BinOp, a: Value, b: Value) -> R<Value> {
        if let (Some(x), Some(y)) = (a.as_int(), b.as_int()) {
            return Ok(Value::Int(match op {
                BinOp::Add => x.checked_add(y).ok_or_else(|| self.overflow())?,
                BinOp::Sub => x.checked_sub(y).ok_or_else(|| self.overflow())?,
                BinOp::Mul => x.checked_mul(y).ok_or_else(|| self.overflow())?,
                BinOp::Div => return Err(self.err(ErrorKind::Type, "true division produces a float; use //")),
                BinOp::FloorDiv | BinOp::Mod => {
                    if y == 0 {
                        return Err(self.err(ErrorKind::ZeroDivision, "integer division or modulo by zero"));
                    }
                    let q = x.checked_div(y).ok_or_else(|| self.overflow())?;
                    let r = x % y;
                    let adjust = r != 0 && ((r < 0) != (y < 0));
                    if op == BinOp::FloorDiv {
                        if adjust {
                            q - 1
                        } else {
                            q
                        }
                    } else if adjust {
                        r + y
                    } else {
                        r
                    }
                }
                BinOp::Pow => {
                    if y < 0 {
                        return Err(self.err(ErrorKind::Type, "negative exponent produces a float"));
                    }
                    let e = u32::try_from(y).map_err(|_| self.overflow())?;
                    x.checked_pow(e).ok_or_else(|| self.overflow())?
                }
            }));
        }
        let repeat = |this: &Self, n: i64, unit: usize| -> R<usize> {
            let n = n.max(0) as usize;
            let total = n.checked_mul(unit).ok_or_else(|| this.overflow())?;
            this.check_size(total)?;
            Ok(n)
        };
        match (op, &a, &b) {
            (BinOp::Add, Value::Str(x), Value::Str(y)) => {
                self.check_size(x.len() + y.len())?;
                let mut s = String::with_capacity(x.len() + y.len());
                s.push_str(x);
                s.push_str(y);
                Ok(Value::str(&s))
            }
            (BinOp::Add, Value::List(x), Value::List(y)) => {
                let mut v = x.borrow().clone();
                v.extend(y.borrow().iter().cloned());
                self.check_size(v.len())?;
                Ok(Value::list(v))
            }
            (BinOp::Add, Value::Tuple(x), Value::Tuple(y)) => {
                let mut v = x.as_ref().clone();
                v.extend(y.iter().cloned());
                Ok(Value::Tuple(Rc::new(v)))
            }
            (BinOp::Mul, Value::Str(s), n) | (BinOp::Mul, n, Value::Str(s)) if n.as_int().is_some() => {
                let n = repeat(self, n.as_int().unwrap(), s.len())?;
                Ok(Value::str(&s.repeat(n)))
            }
            (BinOp::Mul, Value::List(l), n) | (BinOp::Mul, n, Value::List(l)) if n.as_int().is_some() => {
                let items = l.borrow();
                let n = repeat(self, n.as_int().unwrap(), items.len())?;
                let mut v = Vec::with_capacity(items.len() * n);
                for _ in 0..n {
                    v.extend(items.iter().cloned());
                }
                Ok(Value::list(v))
            }
            _ => {
                let sym = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::FloorDiv => "//",
                    BinOp::Mod => "%",
                    BinOp::Pow => "**",
                };
                Err(self.err(
                    ErrorKind::Type,
                    format!("unsupported operand type(s) for {sym}: '{}' and '{}'", a.type_name(), b.type_name()),
                ))
            }
        }
    }

    fn order(&self, a: &Value, b: &Value) -> R<std::cmp::Ordering> {
        if let (Some(x), Some(y)) = (a.as_int(), b.as_int()) {
            return Ok(x.cmp(&y));
        }
        match (a, b) {
            (Value::Str(x), Value::Str(y)) => Ok(x.cmp(y)),
            (Value::List(x), Value::List(y)) => self.order_seq(&x.borrow(), &y.borrow()),
            (Value::Tuple(x), Value::Tuple(y)) => self.order_seq(x, y),
            _ => Err(self.err(
                ErrorKind::Type,
                format!("'<' not supported between instances of '{}' and '{}'", a.type_name(), b.type_name()),
            )),
        }
    }

    fn order_seq(&self, x: &[Value], y: &[Value]) -> R<std::cmp::Ordering> {
        for (p, q) in x.iter().zip(y.iter()) {
            let o = self.order(p, q)?;
            if o.is_ne() {
                return Ok(o);
            }
        }
        Ok(x.len().cmp(&y.len()))
    }

    fn contains(&self, container: &Value, item: &Value) -> R<bool> {
        match container {
            Value::Str(s) => match item {
                Value::Str(sub) => Ok(s.contains(sub.as_ref())),
                other => Err(self.err(
                    ErrorKind::Type,
                    format!("'in <string>' requires string as left operand, not {}", other.type_name()),
                )),
            },
            Value::List(l) => Ok(l.borrow().iter().any(|x| py_eq(x, item))),
            Value::Tuple(t) => Ok(t.iter().any(|x| py_eq(x, item))),
            Value::Range(a, b, s) => Ok(match item.as_int() {
                Some(i) => {
                    let n = range_len(*a, *b, *s);
                    n > 0 && (i - a) % s == 0 && (0..n).contains(&((i - a) / s))
                }
                None => false,
            }),
            other => Err(self.err(ErrorKind::Type, format!("argument of type '{}' is not iterable", other.type_name()))),
        }
    }

    fn compare(&self, op: CmpOp, a: &Value, b: &Value) -> R<bool> {
        use std::cmp::Ordering::*;
        Ok(match op {
            CmpOp::Eq => py_eq(a, b),
            CmpOp::Ne => !py_eq(a, b),
            CmpOp::Lt => self.order(a, b)? == Less,
            CmpOp::Le => self.order(a, b)? != Greater,
            CmpOp::Gt => self.order(a, b)? == Greater,
            CmpOp::Ge => self.order(a, b)? != Less,
            CmpOp::In => self.contains(b, a)?,
            CmpOp::NotIn => !self.contains(b, a)?,
            CmpOp::Is => is_same(a, b),
            CmpOp::IsNot => !is_same(a, b),
        })
    }

    fn call(&mut self, callee: Value, args: Vec<Value>) -> R<Value> {
        match callee {
            Value::Func(id) => self.call_func(id, args),
            Value::Builtin(b) => self.call_builtin(b, args),
            Value::Method(obj, name) => self.call_method(*obj, &name, args),
            other => Err(self.err(ErrorKind::Type, format!("'{}' object is not callable", other.type_name()))),
        }
    }

    #[inline(never)]
    fn call_func(&mut self, id: FuncId, args: Vec<Value>) -> R<Value> {
        let def = &self.prog.funcs[id];
        if args.len() > def.params.len() {
            return Err(self.err(
                ErrorKind::Type,
                format!("{}() takes {} arguments but {} were given", def.name, def.params.len(), args.len()),
            ));
        }
        let defaults = self.defaults.get(&id).cloned().unwrap_or_default();
        let mut locals = HashMap::new();
        let given = args.len();
        for (k, (p, v)) in def.params.iter().zip(args.into_iter().map(Some).chain(std::iter::repeat(None))).enumerate() {
            let v = match v {
                Some(v) => v,
                None => match defaults.get(k).cloned().flatten() {
                    Some(d) => d,
                    None => {
                        return Err(self.err(
                            ErrorKind::Type,
                            format!("{}() missing required argument {:?} ({} given)", def.name, p.name, given),
                        ))
                    }
                },
            };
            locals.insert(p.name.clone(), v);
        }
        if self.depth >= self.limits.max_depth {
            return Err(self.err(ErrorKind::Recursion, "maximum recursion depth exceeded"));
        }
        self.depth += 1;
        let call_line = self.line;
        let mut frame = Frame { func: Some(id), locals };
        let flow = self.exec_block(&def.body, &mut frame);
        self.depth -= 1;
        let flow = flow?;
        self.line = call_line;
        Ok(match flow {
            Flow::Return(v) => v,
            Flow::Normal => Value::None,
            Flow::Break | Flow::Continue => {
                return Err(self.err(ErrorKind::Syntax, "'break' or 'continue' outside loop"));
            }
        })
    }

    fn arity(&self, name: &str, args: &[Value], min: usize, max: usize) -> R<()> {
        if args.len() < min || args.len() > max {
            let expect = if min == max { min.to_string() } else { format!("{min} to {max}") };
            return Err(self.err(
                ErrorKind::Type,
                format!("{name}() takes {expect} arguments ({} given)", args.len()),
            ));
        }
        Ok(())
    }

    fn int_arg(&self, name: &str, v: &Value) -> R<i64> {
        v.as_int().ok_or_else(|| {
            self.err(ErrorKind::Type, format!("{name}() expected an integer, got '{}'", v.type_name()))
        })
    }

    fn str_arg<'v>(&self, name: &str, v: &'v Value) -> R<&'v str> {
        match v {
            Value::Str(s) => Ok(s),
            other => Err(self.err(ErrorKind::Type, format!("{name}() expected a str, got '{}'", other.type_name()))),
        }
    }

    fn len_of(&self, v: &Value) -> R<usize> {
        Ok(match v {
            Value::Str(s) => s.chars().count(),
            Value::List(l) => l.borrow().len(),
            Value::Tuple(t) => t.len(),
            Value::Range(a, b, s) => range_len(*a, *b, *s) as usize,
            other => {
                return Err(self.err(ErrorKind::Type, format!("object of type '{}' has no len()", other.type_name())))
            }
        })
    }

    fn call_builtin(&mut self, b: Builtin, args: Vec<Value>) -> R<Value> {
        match b {
            Builtin::Len => {
                self.arity("len", &args, 1, 1)?;
                Ok(Value::Int(self.len_of(&args[0])? as i64))
            }
            Builtin::Range => {
                self.arity("range", &args, 1, 3)?;
                let ints: Vec<i64> = args.iter().map(|a| self.int_arg("range", a)).collect::<R<_>>()?;
                let (start, stop, step) = match ints.as_slice() {
                    [stop] => (0, *stop, 1),
                    [start, stop] => (*start, *stop, 1),
                    [start, stop, step] => (*start, *stop, *step),
                    _ => unreachable!(),
                };
                if step == 0 {
                    return Err(self.err(ErrorKind::Value, "range() arg 3 must not be zero"));
                }
                Ok(Value::Range(start, stop, step))
            }
            Builtin::Str => {
                self.arity("str", &args, 0, 1)?;
                let s = args.first().map(|v| to_str(v, false)).unwrap_or_default();
                self.check_size(s.len())?;
                Ok(Value::str(&s))
            }
            Builtin::Repr => {
                self.arity("repr", &args, 1, 1)?;
                Ok(Value::str(&to_str(&args[0], true)))
            }
            Builtin::Int => {
                self.arity("int", &args, 0, 1)?;
                match args.first() {
                    None => Ok(Value::Int(0)),
                    Some(Value::Str(s)) => s
                        .trim()
                        .replace('_', "")
                        .parse::<i64>()
                        .map(Value::Int)
                        .map_err(|_| self.err(ErrorKind::Value, format!("invalid literal for int(): {}", repr_str(s)))),
                    Some(v) => Ok(Value::Int(self.int_arg("int", v)?)),
                }
            }
            Builtin::Bool => {
                self.arity("bool", &args, 0, 1)?;
                Ok(Value::Bool(args.first().is_some_and(truthy)))
            }
            Builtin::Chr => {
                self.arity("chr", &args, 1, 1)?;
                let i = self.int_arg("chr", &args[0])?;
                let c = u32::try_from(i)
                    .ok()
                    .and_then(char::from_u32)
                    .ok_or_else(|| self.err(ErrorKind::Value, "chr() arg not in range(0x110000)"))?;
                Ok(Value::str(c.encode_utf8(&mut [0; 4])))
            }
            Builtin::Ord => {
                self.arity("ord", &args, 1, 1)?;
                let s = self.str_arg("ord", &args[0])?;
                let mut it = s.chars();
                match (it.next(), it.next()) {
                    (Some(c), None) => Ok(Value::Int(c as i64)),
                    _ => Err(self.err(
                        ErrorKind::Type,
                        format!("ord() expected a character, but string of length {} found", s.chars().count()),
                    )),
                }
            }
            Builtin::Abs => {
                self.arity("abs", &args, 1, 1)?;
                let i = self.int_arg("abs", &args[0])?;
                Ok(Value::Int(i.checked_abs().ok_or_else(|| self.overflow())?))
            }
            Builtin::Min | Builtin::Max => {
                let name = if b == Builtin::Min { "min" } else { "max" };
                if args.is_empty() {
                    return Err(self.err(ErrorKind::Type, format!("{name} expected at least 1 argument, got 0")));
                }
                let items = if args.len() == 1 { self.iterate(&args[0])? } else { args };
                let mut best = items
                    .first()
                    .cloned()
                    .ok_or_else(|| self.err(ErrorKind::Value, format!("{name}() arg is an empty sequence")))?;
                for x in &items[1..] {
                    let o = self.order(x, &best)?;
                    if (b == Builtin::Min && o.is_lt()) || (b == Builtin::Max && o.is_gt()) {
                        best = x.clone();
                    }
                }
                Ok(best)
            }
            Builtin::Sum => {
                self.arity("sum", &args, 1, 2)?;
                let mut acc = match args.get(1) {
                    Some(v) => self.int_arg("sum", v)?,
                    None => 0,
                };
                for x in self.iterate(&args[0])? {
                    acc = acc.checked_add(self.int_arg("sum", &x)?).ok_or_else(|| self.overflow())?;
                }
                Ok(Value::Int(acc))
            }
            Builtin::List => {
                self.arity("list", &args, 0, 1)?;
                let items = match args.first() {
                    Some(v) => self.iterate(v)?,
                    None => Vec::new(),
                };
                Ok(Value::list(items))
            }
            // Standard output is not part of the test case.
            Builtin::Print => Ok(Value::None),
        }
    }

    fn source(&mut self) -> R<&mut ChoiceSource> {
        let line = self.line;
        self.source
            .as_mut()
            .ok_or_else(|| GenError::new(ErrorKind::Value, line, "random source used outside a generator call"))
    }

    fn randint(&mut self, a: i64, b: i64) -> R<i64> {
        if a > b {
            return Err(self.err(ErrorKind::Value, format!("empty range for randint({a}, {b})")));
        }
        let span = (b as i128 - a as i128 + 1) as u128;
        let span = u64::try_from(span).unwrap_or(u64::MAX);
        let v = self.source()?.below(span);
        Ok((a as i128 + v as i128) as i64)
    }

    fn call_method(&mut self, obj: Value, name: &str, args: Vec<Value>) -> R<Value> {
        match &obj {
            Value::Random => self.random_method(name, args),
            Value::Output => match name {
                "write" => {
                    self.arity("write", &args, 1, 1)?;
                    let s = self.str_arg("write", &args[0])?;
                    self.check_size(self.out.len() + s.len())?;
                    self.out.extend_from_slice(s.as_bytes());
                    Ok(Value::Int(s.chars().count() as i64))
                }
                "flush" => Ok(Value::None),
                _ => Err(self.no_attr(&obj, name)),
            },
            Value::Str(s) => self.str_method(s.clone(), name, args),
            Value::List(l) => self.list_method(l.clone(), name, args),
            _ => Err(self.no_attr(&obj, name)),
        }
    }

    fn no_attr(&self, obj: &Value, name: &str) -> GenError {
        self.err(ErrorKind::Attribute, format!("'{}' object has no attribute {name:?}", obj.type_name()))
    }

    fn random_method(&mut self, name: &str, args: Vec<Value>) -> R<Value> {
        match name {
            "randint" => {
                self.arity("randint", &args, 2, 2)?;
                let a = self.int_arg("randint", &args[0])?;
                let b = self.int_arg("randint", &args[1])?;
                Ok(Value::Int(self.randint(a, b)?))
            }
            "randrange" => {
                self.arity("randrange", &args, 1, 2)?;
                let (a, b) = if args.len() == 1 {
                    (0, self.int_arg("randrange", &args[0])?)
                } else {
                    (self.int_arg("randrange", &args[0])?, self.int_arg("randrange", &args[1])?)
                };
                if a >= b {
                    return Err(self.err(ErrorKind::Value, format!("empty range for randrange({a}, {b})")));
                }
                Ok(Value::Int(self.randint(a, b - 1)?))
            }
            "getrandbits" => {
                self.arity("getrandbits", &args, 1, 1)?;
                let k = self.int_arg("getrandbits", &args[0])?;
                if !(0..=62).contains(&k) {
                    return Err(self.err(ErrorKind::Value, "getrandbits() supports 0 to 62 bits"));
                }
                Ok(Value::Int(self.randint(0, (1i64 << k) - 1)?))
            }
            "choice" => {
                self.arity("choice", &args, 1, 1)?;
                let n = self.len_of(&args[0])?;
                if n == 0 {
                    return Err(self.err(ErrorKind::Index, "cannot choose from an empty sequence"));
                }
                let k = self.randint(0, n as i64 - 1)?;
                self.index(&args[0], &Value::Int(k))
            }
            "shuffle" => {
                self.arity("shuffle", &args, 1, 1)?;
                let Value::List(l) = &args[0] else {
                    return Err(self.err(ErrorKind::Type, "shuffle() expects a list"));
                };
                let n = l.borrow().len();
                for i in (1..n).rev() {
                    let j = self.randint(0, i as i64)? as usize;
                    l.borrow_mut().swap(i, j);
                }
                Ok(Value::None)
            }
            "read_byte" => {
                self.arity("read_byte", &args, 0, 0)?;
                Ok(Value::Int(self.source()?.next_byte() as i64))
            }
            "read_chars" => {
                self.arity("read_chars", &args, 1, 1)?;
                let n = self.int_arg("read_chars", &args[0])?;
                if n < 0 {
                    return Err(self.err(ErrorKind::Value, "read_chars() count must be non-negative"));
                }
                self.check_size(n as usize)?;
                let src = self.source()?;
                let s: String = (0..n).map(|_| (src.next_byte() & 0x7f) as char).collect();
                Ok(Value::str(&s))
            }
            "random" | "uniform" | "gauss" => Err(self.err(ErrorKind::Type, format!("{name}() returns a float; floats are not supported"))),
            _ => Err(self.no_attr(&Value::Random, name)),
        }
    }

    fn str_method(&mut self, s: Rc<str>, name: &str, args: Vec<Value>) -> R<Value> {
        let obj = Value::Str(s.clone());
        match name {
            "join" => {
                self.arity("join", &args, 1, 1)?;
                let items = self.iterate(&args[0])?;
                let mut parts = Vec::with_capacity(items.len());
                let mut total = 0;
                for it in &items {
                    let p = self.str_arg("join", it)?;
                    total += p.len() + s.len();
                    parts.push(p.to_string());
                }
                self.check_size(total)?;
                Ok(Value::str(&parts.join(&s)))
            }
            "upper" => Ok(Value::str(&s.to_uppercase())),
            "lower" => Ok(Value::str(&s.to_lowercase())),
            "strip" | "lstrip" | "rstrip" => {
                self.arity(name, &args, 0, 1)?;
                let set: Option<Vec<char>> = match args.first() {
                    Some(v) => Some(self.str_arg(name, v)?.chars().collect()),
                    None => None,
                };
                let pred = |c: char| match &set {
                    Some(cs) => cs.contains(&c),
                    None => c.is_whitespace(),
                };
                let out = match name {
                    "strip" => s.trim_matches(pred),
                    "lstrip" => s.trim_start_matches(pred),
                    _ => s.trim_end_matches(pred),
                };
                Ok(Value::str(out))
            }
            "replace" => {
                self.arity("replace", &args, 2, 2)?;
                let from = self.str_arg("replace", &args[0])?;
                let to = self.str_arg("replace", &args[1])?;
                let out = if from.is_empty() {
                    let mut o = String::from(to);
                    for c in s.chars() {
                        o.push(c);
                        o.push_str(to);
                    }
                    o
                } else {
                    s.replace(from, to)
                };
                self.check_size(out.len())?;
                Ok(Value::str(&out))
            }
            "startswith" | "endswith" => {
                self.arity(name, &args, 1, 1)?;
                let p = self.str_arg(name, &args[0])?;
                Ok(Value::Bool(if name == "startswith" { s.starts_with(p) } else { s.ends_with(p) }))
            }
            "split" => {
                self.arity("split", &args, 0, 1)?;
                let parts: Vec<Value> = match args.first() {
                    None | Some(Value::None) => s.split_whitespace().map(Value::str).collect(),
                    Some(v) => {
                        let sep = self.str_arg("split", v)?;
                        if sep.is_empty() {
                            return Err(self.err(ErrorKind::Value, "empty separator"));
                        }
                        s.split(sep).map(Value::str).collect()
                    }
                };
                Ok(Value::list(parts))
            }
            "count" | "find" => {
                self.arity(name, &args, 1, 1)?;
                let p = self.str_arg(name, &args[0])?;
                if name == "count" {
                    let n = if p.is_empty() { s.chars().count() + 1 } else { s.matches(p).count() };
                    Ok(Value::Int(n as i64))
                } else {
                    Ok(Value::Int(s.find(p).map(|b| s[..b].chars().count() as i64).unwrap_or(-1)))
                }
            }
            "isdigit" | "isalpha" | "isalnum" | "isspace" => {
                self.arity(name, &args, 0, 0)?;
                let f: fn(char) -> bool = match name {
                    "isdigit" => |c| c.is_ascii_digit(),
                    "isalpha" => |c| c.is_alphabetic(),
                    "isalnum" => |c| c.is_alphanumeric(),
                    _ => |c| c.is_whitespace(),
                };
                Ok(Value::Bool(!s.is_empty() && s.chars().all(f)))
            }
            _ => Err(self.no_attr(&obj, name)),
        }
    }

    fn list_method(&mut self, l: Rc<RefCell<Vec<Value>>>, name: &str, args: Vec<Value>) -> R<Value> {
        let mut args = args;
        match name {
            "append" => {
                self.arity("append", &args, 1, 1)?;
                self.check_size(l.borrow().len() + 1)?;
                l.borrow_mut().push(args.pop().unwrap());
                Ok(Value::None)
            }
            "extend" => {
                self.arity("extend", &args, 1, 1)?;
                let items = self.iterate(&args[0])?;
                self.check_size(l.borrow().len() + items.len())?;
                l.borrow_mut().extend(items);
                Ok(Value::None)
            }
            "insert" => {
                self.arity("insert", &args, 2, 2)?;
                let i = self.int_arg("insert", &args[0])?;
                let len = l.borrow().len() as i64;
                let idx = if i < 0 { (i + len).max(0) } else { i.min(len) } as usize;
                self.check_size(len as usize + 1)?;
                l.borrow_mut().insert(idx, args.pop().unwrap());
                Ok(Value::None)
            }
            "pop" => {
                self.arity("pop", &args, 0, 1)?;
                let len = l.borrow().len();
                if len == 0 {
                    return Err(self.err(ErrorKind::Index, "pop from empty list"));
                }
                let idx = match args.first() {
                    Some(i) => self.norm_index(i, len)?,
                    None => len - 1,
                };
                Ok(l.borrow_mut().remove(idx))
            }
            "remove" | "index" | "count" => {
                self.arity(name, &args, 1, 1)?;
                let pos = l.borrow().iter().position(|x| py_eq(x, &args[0]));
                match name {
                    "count" => Ok(Value::Int(l.borrow().iter().filter(|x| py_eq(x, &args[0])).count() as i64)),
                    _ => match pos {
                        Some(p) if name == "index" => Ok(Value::Int(p as i64)),
                        Some(p) => {
                            l.borrow_mut().remove(p);
                            Ok(Value::None)
                        }
                        None => Err(self.err(ErrorKind::Value, format!("list.{name}(x): x not in list"))),
                    },
                }
            }
            "reverse" => {
                l.borrow_mut().reverse();
                Ok(Value::None)
            }
            "clear" => {
                l.borrow_mut().clear();
                Ok(Value::None)
            }
            "copy" => Ok(Value::list(l.borrow().clone())),
            _ => Err(self.no_attr(&Value::List(l), name)),
        }
    }
}

fn is_same(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::List(x), Value::List(y)) => Rc::ptr_eq(x, y),
        (Value::Bool(x), Value::Bool(y)) => x == y,
        (Value::Bool(_), _) | (_, Value::Bool(_)) => false,
        _ => py_eq(a, b),
    }
}

fn has_method(v: &Value, name: &str) -> bool {
    let names: &[&str] = match v {
        Value::Random => &[
            "randint", "randrange", "getrandbits", "choice", "shuffle", "read_byte", "read_chars", "random", "uniform",
            "gauss",
        ],
        Value::Output => &["write", "flush"],
        Value::Str(_) => &[
            "join", "upper", "lower", "strip", "lstrip", "rstrip", "replace", "startswith", "endswith", "split",
            "count", "find", "isdigit", "isalpha", "isalnum", "isspace",
        ],
        Value::List(_) => &["append", "extend", "insert", "pop", "remove", "index", "count", "reverse", "clear", "copy"],
        _ => &[],
    };
    names.contains(&name)
}
