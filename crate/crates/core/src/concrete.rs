//! Deterministic concrete interpreter for the IR.
//!
//! Used as a ground-truth oracle: every frame and object gets a fresh
//! identity, integers are exact, dispatch follows the receiver's runtime
//! class. API calls go through the same summary table as the abstract
//! machine, returning fixed stub values. Values carry taint so explicit
//! flows can be compared against the abstract taint store.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};

use crate::ir::{
    AExp, AtomicOp, CExp, ClassName, FieldName, InvokeKind, Label, MethodId, MethodRef, Program,
    Reg, Stmt, Type, STRING_CLASS,
};
use crate::machine::domain::AllocSite;
use crate::machine::{AbsValue, Addr, FramePointer, ObjectPointer, StmtPos};
use crate::taint::{ApiSummaryTable, RetAbstraction, Role, SinkKind, TaintSet, TaintVal};

pub type FrameId = u32;
pub type ObjId = u32;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum CValue {
    Int(BigInt),
    Bool(bool),
    Str(String),
    Null,
    Void,
    Object(ObjId),
}

impl fmt::Display for CValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CValue::Int(n) => write!(f, "{n}"),
            CValue::Bool(b) => write!(f, "{b}"),
            CValue::Str(s) => crate::ir::sexp::write_string_literal(f, s),
            CValue::Null => f.write_str("null"),
            CValue::Void => f.write_str("void"),
            CValue::Object(o) => write!(f, "#{o}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum CAddr {
    Reg(FrameId, Reg),
    Field(ObjId, FieldName),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameInfo {
    pub method: MethodId,
    /// Every call site from the entry frame down to this frame.
    pub call_string: Vec<StmtPos>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjInfo {
    pub class: ClassName,
    pub site: AllocSite,
    /// Call string of the allocating frame.
    pub alloc_ctx: Vec<StmtPos>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CFrame {
    Fun {
        caller: FrameId,
        ret: StmtPos,
    },
    Handler {
        class: ClassName,
        label: Label,
        owner: FrameId,
        site: StmtPos,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum CPhase {
    Exec,
    AfterCall,
    Unwind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConcreteState {
    pub method: MethodId,
    pub index: u32,
    pub phase: CPhase,
    pub frame: FrameId,
    pub stack_depth: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum CEvent {
    Source {
        pos: StmtPos,
        category: TaintVal,
    },
    Sink {
        pos: StmtPos,
        category: TaintVal,
        kind: SinkKind,
    },
    Permission {
        pos: StmtPos,
        permission: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConcreteError {
    #[error("out of fuel")]
    OutOfFuel,
    #[error("uncaught exception of class {0}")]
    UncaughtException(ClassName),
    #[error("type error: {0}")]
    TypeError(String),
    #[error("division by zero")]
    DivideByZero,
    #[error("execution fell off the end of {0}")]
    FellOffMethod(MethodRef),
    #[error("malformed: {0}")]
    Malformed(String),
    #[error("unknown entry point {0}")]
    UnknownEntry(MethodRef),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Returned(CValue),
    Failed(ConcreteError),
}

/// Everything a run observed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    /// States in the order they were executed.
    pub states: Vec<ConcreteState>,
    /// Every store write, in order.
    pub writes: Vec<(CAddr, CValue, TaintSet)>,
    pub store: BTreeMap<CAddr, (CValue, TaintSet)>,
    pub frames: Vec<FrameInfo>,
    pub objects: Vec<ObjInfo>,
    pub events: Vec<CEvent>,
    pub outcome: Outcome,
}

impl Trace {
    pub fn steps(&self) -> usize {
        self.states.len()
    }

    pub fn result(&self) -> Result<&CValue, &ConcreteError> {
        match &self.outcome {
            Outcome::Returned(v) => Ok(v),
            Outcome::Failed(e) => Err(e),
        }
    }

    /// The abstract frame pointer of `frame` under `k`-call-string contexts.
    pub fn abs_fp(&self, frame: FrameId, k: usize) -> FramePointer {
        let info = &self.frames[frame as usize];
        FramePointer {
            method: info.method,
            ctx: last_k(&info.call_string, k),
        }
    }

    pub fn abs_object(&self, o: ObjId, k: usize, heap_context: bool) -> ObjectPointer {
        let info = &self.objects[o as usize];
        ObjectPointer {
            site: info.site.clone(),
            ctx: if heap_context {
                last_k(&info.alloc_ctx, k)
            } else {
                Vec::new()
            },
        }
    }

    pub fn abs_value(&self, v: &CValue, k: usize, heap_context: bool) -> AbsValue {
        match v {
            CValue::Int(n) => n.to_i64().map(AbsValue::Int).unwrap_or(AbsValue::AnyInt),
            CValue::Bool(b) => AbsValue::Bool(*b),
            CValue::Str(s) => AbsValue::Str(s.clone()),
            CValue::Null => AbsValue::Null,
            CValue::Void => AbsValue::Void,
            CValue::Object(o) => AbsValue::Object(
                self.abs_object(*o, k, heap_context),
                self.objects[*o as usize].class.clone(),
            ),
        }
    }

    pub fn abs_addr(&self, a: &CAddr, k: usize, heap_context: bool) -> Addr {
        match a {
            CAddr::Reg(f, r) => Addr::Reg(self.abs_fp(*f, k), r.clone()),
            CAddr::Field(o, field) => {
                Addr::Field(self.abs_object(*o, k, heap_context), field.clone())
            }
        }
    }
}

fn last_k(cs: &[StmtPos], k: usize) -> Vec<StmtPos> {
    cs[cs.len().saturating_sub(k)..].to_vec()
}

/// Interpreter state; allocate framework objects before [`Interp::run`].
pub struct Interp<'p> {
    program: &'p Program,
    summaries: &'p ApiSummaryTable,
    store: BTreeMap<CAddr, (CValue, TaintSet)>,
    writes: Vec<(CAddr, CValue, TaintSet)>,
    frames: Vec<FrameInfo>,
    objects: Vec<ObjInfo>,
    events: Vec<CEvent>,
}

fn default_value(t: &Type) -> CValue {
    match t {
        Type::Int | Type::Byte | Type::Char => CValue::Int(BigInt::zero()),
        Type::Boolean => CValue::Bool(false),
        Type::Class(_) | Type::Void => CValue::Null,
    }
}

fn stub(r: RetAbstraction, method: &str) -> CValue {
    match r {
        RetAbstraction::AnyString => CValue::Str(format!("api:{method}")),
        RetAbstraction::AnyInt => CValue::Int(BigInt::zero()),
        RetAbstraction::Null => CValue::Null,
        RetAbstraction::Void => CValue::Void,
    }
}

type Step<T> = Result<T, ConcreteError>;

impl<'p> Interp<'p> {
    pub fn new(program: &'p Program, summaries: &'p ApiSummaryTable) -> Self {
        Interp {
            program,
            summaries,
            store: BTreeMap::new(),
            writes: Vec::new(),
            frames: Vec::new(),
            objects: Vec::new(),
            events: Vec::new(),
        }
    }

    /// A framework-allocated instance of `class` with default fields.
    pub fn alloc_framework(&mut self, class: &ClassName) -> CValue {
        CValue::Object(self.alloc(class, AllocSite::Framework(class.clone()), Vec::new()))
    }

    /// Writes a field of an existing object, with taint.
    pub fn set_field(&mut self, obj: ObjId, field: &FieldName, v: CValue, t: TaintSet) {
        self.write(CAddr::Field(obj, field.clone()), v, t);
    }

    fn alloc(&mut self, class: &ClassName, site: AllocSite, alloc_ctx: Vec<StmtPos>) -> ObjId {
        let id = self.objects.len() as ObjId;
        self.objects.push(ObjInfo {
            class: class.clone(),
            site,
            alloc_ctx,
        });
        for f in self.program.all_fields(class) {
            self.write(
                CAddr::Field(id, f.name.clone()),
                default_value(&f.ty),
                TaintSet::EMPTY,
            );
        }
        id
    }

    fn write(&mut self, a: CAddr, v: CValue, t: TaintSet) {
        self.writes.push((a.clone(), v.clone(), t));
        self.store.insert(a, (v, t));
    }

    fn read(&self, a: &CAddr) -> Step<(CValue, TaintSet)> {
        self.store
            .get(a)
            .cloned()
            .ok_or_else(|| ConcreteError::TypeError(format!("read of unbound {a:?}")))
    }

    fn new_frame(&mut self, method: MethodId, call_string: Vec<StmtPos>) -> FrameId {
        self.frames.push(FrameInfo {
            method,
            call_string,
        });
        (self.frames.len() - 1) as FrameId
    }

    fn class_of(&self, v: &CValue) -> Option<ClassName> {
        match v {
            CValue::Object(o) => Some(self.objects[*o as usize].class.clone()),
            CValue::Str(_) => Some(STRING_CLASS.into()),
            _ => None,
        }
    }

    fn subclass(&self, c: &ClassName, sup: &ClassName) -> bool {
        self.program.is_subclass(c, sup).unwrap_or(false)
    }

    fn eval(&self, ae: &AExp, frame: FrameId) -> Step<(CValue, TaintSet)> {
        Ok(match ae {
            AExp::This => self.read(&CAddr::Reg(frame, Reg::this()))?,
            AExp::Name(r) => self.read(&CAddr::Reg(frame, r.clone()))?,
            AExp::True => (CValue::Bool(true), TaintSet::EMPTY),
            AExp::False => (CValue::Bool(false), TaintSet::EMPTY),
            AExp::Null => (CValue::Null, TaintSet::EMPTY),
            AExp::Void => (CValue::Void, TaintSet::EMPTY),
            AExp::Int(n) => (CValue::Int(BigInt::from(*n)), TaintSet::EMPTY),
            AExp::Str(s) => (CValue::Str(s.clone()), TaintSet::EMPTY),
            AExp::Op(op, args) => {
                let mut vals = Vec::new();
                let mut t = TaintSet::EMPTY;
                for a in args {
                    let (v, at) = self.eval(a, frame)?;
                    vals.push(v);
                    t = t.union(at);
                }
                (apply(*op, &vals)?, t)
            }
            AExp::InstanceOf(inner, class) => {
                let (v, t) = self.eval(inner, frame)?;
                let b = match &v {
                    CValue::Object(_) | CValue::Str(_) => {
                        self.class_of(&v).is_some_and(|c| self.subclass(&c, class))
                    }
                    _ => false,
                };
                (CValue::Bool(b), t)
            }
        })
    }

    /// Runs `entry` with `args` (receiver first for instance methods) for at
    /// most `fuel` steps.
    pub fn run(mut self, entry: &MethodRef, args: &[CValue], fuel: usize) -> Trace {
        let mut states = Vec::new();
        let outcome = match self.program.method_id(entry) {
            None => Outcome::Failed(ConcreteError::UnknownEntry(entry.clone())),
            Some(id) => match self.exec(id, args, fuel, &mut states) {
                Ok(v) => Outcome::Returned(v),
                Err(e) => Outcome::Failed(e),
            },
        };
        Trace {
            states,
            writes: self.writes,
            store: self.store,
            frames: self.frames,
            objects: self.objects,
            events: self.events,
            outcome,
        }
    }

    fn exec(
        &mut self,
        entry: MethodId,
        args: &[CValue],
        fuel: usize,
        states: &mut Vec<ConcreteState>,
    ) -> Step<CValue> {
        let m = self.program.method(entry);
        let frame = self.new_frame(entry, Vec::new());
        let mut rest = args;
        if !m.is_static() {
            let (first, tail) = args
                .split_first()
                .ok_or_else(|| ConcreteError::TypeError("missing receiver".into()))?;
            self.write(
                CAddr::Reg(frame, Reg::this()),
                first.clone(),
                TaintSet::EMPTY,
            );
            rest = tail;
        }
        for (i, v) in rest.iter().enumerate() {
            self.write(CAddr::Reg(frame, Reg::param(i)), v.clone(), TaintSet::EMPTY);
        }

        let mut kont: Vec<CFrame> = Vec::new();
        let mut st = ConcreteState {
            method: entry,
            index: 0,
            phase: CPhase::Exec,
            frame,
            stack_depth: 0,
        };
        for _ in 0..fuel {
            st.stack_depth = kont.len();
            states.push(st.clone());
            match self.step(&st, &mut kont)? {
                Next::State(s) => st = s,
                Next::Done(v) => return Ok(v),
            }
        }
        Err(ConcreteError::OutOfFuel)
    }

    fn step(&mut self, st: &ConcreteState, kont: &mut Vec<CFrame>) -> Step<Next> {
        let p = self.program;
        let body = &p.method(st.method).body;
        let stmt = body
            .get(st.index as usize)
            .ok_or_else(|| ConcreteError::FellOffMethod(p.method_ref(st.method).clone()))?;
        let pos = StmtPos {
            method: st.method,
            index: st.index,
        };
        let frame = st.frame;
        let at = |index: usize, phase: CPhase| {
            Next::State(ConcreteState {
                method: st.method,
                index: index as u32,
                phase,
                frame,
                stack_depth: 0,
            })
        };
        let next = at(st.index as usize + 1, CPhase::Exec);
        let label = |l: &Label| {
            p.label_target(st.method, l)
                .ok_or_else(|| ConcreteError::Malformed(format!("unknown label {l}")))
        };

        if st.phase == CPhase::AfterCall {
            let (v, t) = self.read(&CAddr::Reg(frame, Reg::ret()))?;
            if let Stmt::AssignComplex(dest, _) = stmt {
                self.write(CAddr::Reg(frame, dest.clone()), v, t);
            }
            return Ok(next);
        }

        match stmt {
            Stmt::Label(_) | Stmt::Nop | Stmt::Line(_) => Ok(next),
            Stmt::Goto(l) => Ok(at(label(l)?, CPhase::Exec)),
            Stmt::If(cond, l) => {
                let (v, _) = self.eval(cond, frame)?;
                if truthy(&v) {
                    Ok(at(label(l)?, CPhase::Exec))
                } else {
                    Ok(next)
                }
            }
            Stmt::AssignAtomic(dest, ae) => {
                let (v, t) = self.eval(ae, frame)?;
                self.write(CAddr::Reg(frame, dest.clone()), v, t);
                Ok(next)
            }
            Stmt::MoveFromRet(dest) => {
                let (v, t) = self.read(&CAddr::Reg(frame, Reg::ret()))?;
                self.write(CAddr::Reg(frame, dest.clone()), v, t);
                Ok(next)
            }
            Stmt::AssignComplex(dest, CExp::New(class)) => {
                let ctx = self.frames[frame as usize].call_string.clone();
                let o = self.alloc(class, AllocSite::Stmt(pos), ctx);
                self.write(
                    CAddr::Reg(frame, dest.clone()),
                    CValue::Object(o),
                    TaintSet::EMPTY,
                );
                Ok(next)
            }
            Stmt::AssignComplex(
                _,
                CExp::Invoke {
                    kind,
                    args,
                    arg_types,
                    class,
                    method,
                },
            ) => {
                let mut vals = Vec::new();
                let mut taints = Vec::new();
                for a in args {
                    let (v, t) = self.eval(a, frame)?;
                    vals.push(v);
                    taints.push(t);
                }
                let after = at(st.index as usize, CPhase::AfterCall);
                let ret = CAddr::Reg(frame, Reg::ret());

                let matched: Vec<_> = self
                    .summaries
                    .matching(class.as_str(), method.as_str())
                    .collect();
                if let Some(first) = matched.first() {
                    let incoming = taints.iter().fold(TaintSet::EMPTY, |a, t| a.union(*t));
                    let mut ret_taint = TaintSet::EMPTY;
                    for s in &matched {
                        for role in &s.roles {
                            match role {
                                Role::Source(cats) => {
                                    ret_taint = ret_taint.union(*cats);
                                    for category in cats.iter() {
                                        self.events.push(CEvent::Source { pos, category });
                                    }
                                }
                                Role::Propagate => ret_taint = ret_taint.union(incoming),
                                Role::Sink { kind, categories } => {
                                    let hit =
                                        categories.map_or(incoming, |c| incoming.intersect(c));
                                    for category in hit.iter() {
                                        self.events.push(CEvent::Sink {
                                            pos,
                                            category,
                                            kind: *kind,
                                        });
                                    }
                                }
                                Role::Neutral => {}
                            }
                        }
                        for permission in &s.permissions {
                            self.events.push(CEvent::Permission {
                                pos,
                                permission: permission.clone(),
                            });
                        }
                    }
                    let v = stub(first.ret, method.as_str());
                    self.write(ret, v, ret_taint);
                    return Ok(after);
                }

                let callee = match kind {
                    InvokeKind::Static => p.resolve_method(class, method, arg_types, *kind).ok(),
                    _ => {
                        let recv = vals.first().ok_or_else(|| {
                            ConcreteError::TypeError("call without receiver".into())
                        })?;
                        let CValue::Object(o) = recv else {
                            return Err(ConcreteError::TypeError(format!(
                                "receiver {recv} of {class}.{method}"
                            )));
                        };
                        let lookup = match kind {
                            InvokeKind::Virtual | InvokeKind::Interface => {
                                self.objects[*o as usize].class.clone()
                            }
                            _ => class.clone(),
                        };
                        p.resolve_method(&lookup, method, arg_types, *kind).ok()
                    }
                };
                let Some(callee) = callee else {
                    self.write(ret, CValue::Void, TaintSet::EMPTY);
                    return Ok(after);
                };
                let mut cs = self.frames[frame as usize].call_string.clone();
                cs.push(pos);
                let new = self.new_frame(callee, cs);
                let offset = usize::from(kind.has_receiver());
                if kind.has_receiver() {
                    self.write(CAddr::Reg(new, Reg::this()), vals[0].clone(), taints[0]);
                }
                for (j, (v, t)) in vals[offset..].iter().zip(&taints[offset..]).enumerate() {
                    self.write(CAddr::Reg(new, Reg::param(j)), v.clone(), *t);
                }
                kont.push(CFrame::Fun {
                    caller: frame,
                    ret: pos,
                });
                Ok(Next::State(ConcreteState {
                    method: callee,
                    index: 0,
                    phase: CPhase::Exec,
                    frame: new,
                    stack_depth: 0,
                }))
            }
            Stmt::FieldPut {
                object,
                field,
                value,
            } => {
                let o = self.object(object, frame)?;
                let (v, t) = self.eval(value, frame)?;
                self.write(CAddr::Field(o, field.clone()), v, t);
                Ok(next)
            }
            Stmt::FieldGet {
                dest,
                object,
                field,
            } => {
                let o = self.object(object, frame)?;
                let (v, t) = self.read(&CAddr::Field(o, field.clone()))?;
                self.write(CAddr::Reg(frame, dest.clone()), v, t);
                Ok(next)
            }
            Stmt::PushHandler(class, l) => {
                kont.push(CFrame::Handler {
                    class: class.clone(),
                    label: l.clone(),
                    owner: frame,
                    site: pos,
                });
                Ok(next)
            }
            Stmt::PopHandler => match kont.pop() {
                Some(CFrame::Handler { .. }) => Ok(next),
                _ => Err(ConcreteError::Malformed(format!(
                    "pop-handler without a handler at {}",
                    p.method_ref(st.method)
                ))),
            },
            Stmt::Return(ae) => {
                let (v, t) = self.eval(ae, frame)?;
                match kont.pop() {
                    None => {
                        self.write(CAddr::Reg(frame, Reg::ret()), v.clone(), t);
                        Ok(Next::Done(v))
                    }
                    Some(CFrame::Handler { .. }) => Ok(at(st.index as usize, CPhase::Exec)),
                    Some(CFrame::Fun { caller, ret }) => {
                        self.write(CAddr::Reg(caller, Reg::ret()), v, t);
                        Ok(Next::State(ConcreteState {
                            method: ret.method,
                            index: ret.index,
                            phase: CPhase::AfterCall,
                            frame: caller,
                            stack_depth: 0,
                        }))
                    }
                }
            }
            Stmt::Throw(ae) => {
                let (v, t) = self.eval(ae, frame)?;
                let CValue::Object(o) = v else {
                    return Err(ConcreteError::TypeError(format!("throw of {v}")));
                };
                let thrown = self.objects[o as usize].class.clone();
                match kont.pop() {
                    None => Err(ConcreteError::UncaughtException(thrown)),
                    // passing a call frame keeps the phase, as the abstract machine does
                    Some(CFrame::Fun { .. }) => Ok(at(st.index as usize, st.phase)),
                    Some(CFrame::Handler {
                        class,
                        label: l,
                        owner,
                        ..
                    }) => {
                        if self.subclass(&thrown, &class) {
                            let owner_method = self.frames[owner as usize].method;
                            let target = p.label_target(owner_method, &l).ok_or_else(|| {
                                ConcreteError::Malformed(format!("unknown label {l}"))
                            })?;
                            self.write(CAddr::Reg(owner, Reg::exn()), CValue::Object(o), t);
                            Ok(Next::State(ConcreteState {
                                method: owner_method,
                                index: target as u32,
                                phase: CPhase::Exec,
                                frame: owner,
                                stack_depth: 0,
                            }))
                        } else {
                            Ok(at(st.index as usize, CPhase::Unwind))
                        }
                    }
                }
            }
        }
    }

    fn object(&self, ae: &AExp, frame: FrameId) -> Step<ObjId> {
        match self.eval(ae, frame)?.0 {
            CValue::Object(o) => Ok(o),
            v => Err(ConcreteError::TypeError(format!("field access on {v}"))),
        }
    }
}

enum Next {
    State(ConcreteState),
    Done(CValue),
}

fn truthy(v: &CValue) -> bool {
    match v {
        CValue::Bool(b) => *b,
        CValue::Int(n) => !n.is_zero(),
        CValue::Null | CValue::Void => false,
        CValue::Object(_) | CValue::Str(_) => true,
    }
}

fn apply(op: AtomicOp, args: &[CValue]) -> Step<CValue> {
    use CValue::*;
    let bad = || ConcreteError::TypeError(format!("{} applied to {}", op.keyword(), show(args)));
    if let [a] = args {
        return match (op, a) {
            (AtomicOp::Neg, Int(n)) => Ok(Int(-n)),
            (AtomicOp::Not, Bool(b)) => Ok(Bool(!b)),
            (AtomicOp::Not, Int(n)) => Ok(Int(!n)),
            _ => Err(bad()),
        };
    }
    let [a, b] = args else { return Err(bad()) };
    Ok(match (op, a, b) {
        (AtomicOp::Eq, _, _) => Bool(a == b),
        (AtomicOp::Ne, _, _) => Bool(a != b),
        (AtomicOp::Add, Str(x), Str(y)) => Str(format!("{x}{y}")),
        (AtomicOp::And, Bool(x), Bool(y)) => Bool(*x && *y),
        (AtomicOp::Or, Bool(x), Bool(y)) => Bool(*x || *y),
        (AtomicOp::Xor, Bool(x), Bool(y)) => Bool(x ^ y),
        (_, Int(x), Int(y)) => match op {
            AtomicOp::Add => Int(x + y),
            AtomicOp::Sub => Int(x - y),
            AtomicOp::Mul => Int(x * y),
            AtomicOp::Div | AtomicOp::Rem if y.is_zero() => {
                return Err(ConcreteError::DivideByZero)
            }
            AtomicOp::Div => Int(x / y),
            AtomicOp::Rem => Int(x % y),
            AtomicOp::And => Int(x & y),
            AtomicOp::Or => Int(x | y),
            AtomicOp::Xor => Int(x ^ y),
            AtomicOp::Lt => Bool(x < y),
            AtomicOp::Le => Bool(x <= y),
            AtomicOp::Gt => Bool(x > y),
            AtomicOp::Ge => Bool(x >= y),
            _ => return Err(bad()),
        },
        _ => return Err(bad()),
    })
}

fn show(args: &[CValue]) -> String {
    args.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}

/// Runs `entry` on a fresh interpreter with no framework objects.
pub fn run_concrete(
    p: &Program,
    summaries: &ApiSummaryTable,
    entry: &MethodRef,
    args: &[CValue],
    fuel: usize,
) -> Trace {
    Interp::new(p, summaries).run(entry, args, fuel)
}

/// Distinct abstract positions `(method, index)` visited by a trace.
pub fn visited_positions(t: &Trace) -> BTreeSet<StmtPos> {
    t.states
        .iter()
        .map(|s| StmtPos {
            method: s.method,
            index: s.index,
        })
        .collect()
}
