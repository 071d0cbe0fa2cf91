//! Abstract addresses, values and the two stores.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::Serialize;

use crate::ir::{AtomicOp, ClassName, FieldName, MethodId, Program, Reg};
use crate::taint::TaintSet;

/// Default number of distinct integer (or string) constants an address may
/// hold before they are widened to `AnyInt` (`AnyStr`).
/// Type-default value of a fresh object's field.
pub fn default_abs(t: &crate::ir::Type) -> AbsValue {
    use crate::ir::Type;
    match t {
        Type::Int | Type::Byte | Type::Char => AbsValue::Int(0),
        Type::Boolean => AbsValue::Bool(false),
        Type::Class(_) | Type::Void => AbsValue::Null,
    }
}

pub const DEFAULT_CONSTANT_BUDGET: usize = 8;

/// A statement position: method plus body index. Used for call sites and
/// allocation sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct StmtPos {
    pub method: MethodId,
    pub index: u32,
}

impl StmtPos {
    pub fn new(method: MethodId, index: usize) -> Self {
        StmtPos {
            method,
            index: index as u32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AllocSite {
    Stmt(StmtPos),
    /// An object the framework hands to an entry point (receiver or argument).
    Framework(ClassName),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ObjectPointer {
    pub site: AllocSite,
    /// Allocating frame's context; empty unless heap context is enabled.
    pub ctx: Vec<StmtPos>,
}

impl ObjectPointer {
    pub fn framework(class: ClassName) -> Self {
        ObjectPointer {
            site: AllocSite::Framework(class),
            ctx: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FramePointer {
    pub method: MethodId,
    /// The most recent call sites, oldest first, at most k long.
    pub ctx: Vec<StmtPos>,
}

impl FramePointer {
    pub fn entry(method: MethodId) -> Self {
        FramePointer {
            method,
            ctx: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Addr {
    Reg(FramePointer, Reg),
    Field(ObjectPointer, FieldName),
}

impl Addr {
    pub fn reg(fp: &FramePointer, r: Reg) -> Addr {
        Addr::Reg(fp.clone(), r)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AbsValue {
    Object(ObjectPointer, ClassName),
    Str(String),
    AnyStr,
    Int(i64),
    AnyInt,
    Bool(bool),
    Null,
    Void,
}

impl AbsValue {
    /// Whether `if` may take the branch: `None` means either.
    pub fn truthiness(&self) -> Option<bool> {
        match self {
            AbsValue::Bool(b) => Some(*b),
            AbsValue::Int(n) => Some(*n != 0),
            AbsValue::AnyInt => None,
            AbsValue::Null | AbsValue::Void => Some(false),
            AbsValue::Object(..) | AbsValue::Str(_) | AbsValue::AnyStr => Some(true),
        }
    }

    fn is_int(&self) -> bool {
        matches!(self, AbsValue::Int(_) | AbsValue::AnyInt)
    }

    fn is_str(&self) -> bool {
        matches!(self, AbsValue::Str(_) | AbsValue::AnyStr)
    }
}

/// A finite set of abstract values. Exact integers and exact strings are each
/// capped by a budget; past it (or once the `Any` element is present) they
/// collapse into `AnyInt` / `AnyStr`.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Val(BTreeSet<AbsValue>);

impl Val {
    pub fn new() -> Self {
        Val(BTreeSet::new())
    }

    pub fn singleton(v: AbsValue) -> Self {
        let mut s = BTreeSet::new();
        s.insert(v);
        Val(s)
    }

    pub fn from_values(values: impl IntoIterator<Item = AbsValue>, budget: usize) -> Self {
        let mut v = Val(values.into_iter().collect());
        v.normalize(budget);
        v
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &AbsValue> {
        self.0.iter()
    }

    pub fn contains(&self, v: &AbsValue) -> bool {
        self.0.contains(v)
    }

    /// Whether this set covers `v`, taking `AnyInt`/`AnyStr` into account.
    pub fn covers(&self, v: &AbsValue) -> bool {
        match v {
            AbsValue::Int(_) => self.0.contains(v) || self.0.contains(&AbsValue::AnyInt),
            AbsValue::Str(_) => self.0.contains(v) || self.0.contains(&AbsValue::AnyStr),
            _ => self.0.contains(v),
        }
    }

    /// `self ⊑ other` in the widened order.
    pub fn leq(&self, other: &Val) -> bool {
        self.0.iter().all(|v| other.covers(v))
    }

    pub fn objects(&self) -> impl Iterator<Item = (&ObjectPointer, &ClassName)> {
        self.0.iter().filter_map(|v| match v {
            AbsValue::Object(op, c) => Some((op, c)),
            _ => None,
        })
    }

    fn normalize(&mut self, budget: usize) {
        let ints = self
            .0
            .iter()
            .filter(|v| matches!(v, AbsValue::Int(_)))
            .count();
        if ints > 0 && (ints > budget || self.0.contains(&AbsValue::AnyInt)) {
            self.0.retain(|v| !matches!(v, AbsValue::Int(_)));
            self.0.insert(AbsValue::AnyInt);
        }
        let strs = self
            .0
            .iter()
            .filter(|v| matches!(v, AbsValue::Str(_)))
            .count();
        if strs > 0 && (strs > budget || self.0.contains(&AbsValue::AnyStr)) {
            self.0.retain(|v| !matches!(v, AbsValue::Str(_)));
            self.0.insert(AbsValue::AnyStr);
        }
    }

    /// Joins `other` into `self`; returns whether `self` grew.
    pub fn join(&mut self, other: &Val, budget: usize) -> bool {
        if other.0.iter().all(|v| self.covers(v)) {
            return false;
        }
        self.0.extend(other.0.iter().cloned());
        self.normalize(budget);
        true
    }

    pub fn insert(&mut self, v: AbsValue, budget: usize) -> bool {
        self.join(&Val::singleton(v), budget)
    }
}

impl FromIterator<AbsValue> for Val {
    fn from_iter<T: IntoIterator<Item = AbsValue>>(iter: T) -> Self {
        Val::from_values(iter, DEFAULT_CONSTANT_BUDGET)
    }
}

/// The global value store: addresses to value sets. Absent means empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Store {
    map: BTreeMap<Addr, Val>,
    budget: usize,
}

impl Default for Store {
    fn default() -> Self {
        Store::new(DEFAULT_CONSTANT_BUDGET)
    }
}

static EMPTY_VAL: Val = Val(BTreeSet::new());

impl Store {
    pub fn new(budget: usize) -> Self {
        Store {
            map: BTreeMap::new(),
            budget,
        }
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn get(&self, a: &Addr) -> &Val {
        self.map.get(a).unwrap_or(&EMPTY_VAL)
    }

    /// Returns whether the store grew.
    pub fn join(&mut self, a: &Addr, v: &Val) -> bool {
        if v.is_empty() {
            return false;
        }
        let budget = self.budget;
        match self.map.get_mut(a) {
            Some(cur) => cur.join(v, budget),
            None => {
                let mut fresh = Val::new();
                fresh.join(v, budget);
                self.map.insert(a.clone(), fresh);
                true
            }
        }
    }

    pub fn join_store(&mut self, other: &Store) -> bool {
        let mut grew = false;
        for (a, v) in &other.map {
            grew |= self.join(a, v);
        }
        grew
    }

    pub fn leq(&self, other: &Store) -> bool {
        self.map.iter().all(|(a, v)| v.leq(other.get(a)))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Addr, &Val)> {
        self.map.iter()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// One line per address, in address order, with program names resolved.
    pub fn canonical(&self, p: &Program) -> String {
        use fmt::Write;
        let mut out = String::new();
        for (a, v) in &self.map {
            let _ = writeln!(out, "{} = {}", DisplayAddr(p, a), DisplayVal(p, v));
        }
        out
    }
}

/// The taint store: addresses to taint category sets.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TaintStore {
    map: BTreeMap<Addr, TaintSet>,
}

impl TaintStore {
    pub fn new() -> Self {
        TaintStore::default()
    }

    pub fn get(&self, a: &Addr) -> TaintSet {
        self.map.get(a).copied().unwrap_or_default()
    }

    pub fn join(&mut self, a: &Addr, t: TaintSet) -> bool {
        if t.is_empty() {
            return false;
        }
        match self.map.get_mut(a) {
            Some(cur) => cur.join(t),
            None => {
                self.map.insert(a.clone(), t);
                true
            }
        }
    }

    pub fn join_store(&mut self, other: &TaintStore) -> bool {
        let mut grew = false;
        for (a, t) in &other.map {
            grew |= self.join(a, *t);
        }
        grew
    }

    pub fn leq(&self, other: &TaintStore) -> bool {
        self.map.iter().all(|(a, t)| t.is_subset(other.get(a)))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Addr, TaintSet)> {
        self.map.iter().map(|(a, t)| (a, *t))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Union of every category in the store.
    pub fn categories(&self) -> TaintSet {
        self.map
            .values()
            .fold(TaintSet::EMPTY, |acc, t| acc.union(*t))
    }

    pub fn canonical(&self, p: &Program) -> String {
        use fmt::Write;
        let mut out = String::new();
        for (a, t) in &self.map {
            let _ = writeln!(out, "{} = {}", DisplayAddr(p, a), t);
        }
        out
    }
}

/// Outcome of a primitive on one combination of operands. `None` means the
/// combination is ill-typed or divides by zero and contributes nothing.
fn prim(op: AtomicOp, args: &[&AbsValue]) -> Option<Vec<AbsValue>> {
    use AbsValue::*;
    let one = |v| Some(alloc::vec![v]);
    let both = || Some(alloc::vec![Bool(false), Bool(true)]);
    let int_result = |r: Option<i64>| one(r.map(Int).unwrap_or(AnyInt));
    if args.len() == 1 {
        return match (op, args[0]) {
            (AtomicOp::Neg, Int(a)) => int_result(a.checked_neg()),
            (AtomicOp::Neg, AnyInt) => one(AnyInt),
            (AtomicOp::Not, Bool(b)) => one(Bool(!b)),
            (AtomicOp::Not, Int(a)) => one(Int(!a)),
            (AtomicOp::Not, AnyInt) => one(AnyInt),
            _ => None,
        };
    }
    let (a, b) = (args[0], args[1]);
    match op {
        AtomicOp::Eq | AtomicOp::Ne => {
            let eq: Option<bool> = match (a, b) {
                (Int(x), Int(y)) => Some(x == y),
                (Str(x), Str(y)) => Some(x == y),
                (Bool(x), Bool(y)) => Some(x == y),
                (Null, Null) | (Void, Void) => Some(true),
                (Object(p, _), Object(q, _)) if p != q => Some(false),
                (Object(..), Object(..)) => None,
                (x, y) if x.is_int() && y.is_int() => None,
                (x, y) if x.is_str() && y.is_str() => None,
                _ => Some(false),
            };
            match eq {
                Some(e) => one(Bool(if op == AtomicOp::Eq { e } else { !e })),
                None => both(),
            }
        }
        AtomicOp::Add if a.is_str() && b.is_str() => match (a, b) {
            (Str(x), Str(y)) => {
                let mut s = x.clone();
                s.push_str(y);
                one(Str(s))
            }
            _ => one(AnyStr),
        },
        AtomicOp::And | AtomicOp::Or | AtomicOp::Xor => match (a, b) {
            (Bool(x), Bool(y)) => one(Bool(match op {
                AtomicOp::And => *x && *y,
                AtomicOp::Or => *x || *y,
                _ => x ^ y,
            })),
            (Int(x), Int(y)) => one(Int(match op {
                AtomicOp::And => x & y,
                AtomicOp::Or => x | y,
                _ => x ^ y,
            })),
            (x, y) if x.is_int() && y.is_int() => one(AnyInt),
            _ => None,
        },
        _ => match (a, b) {
            (Int(x), Int(y)) => match op {
                AtomicOp::Add => int_result(x.checked_add(*y)),
                AtomicOp::Sub => int_result(x.checked_sub(*y)),
                AtomicOp::Mul => int_result(x.checked_mul(*y)),
                AtomicOp::Div if *y == 0 => None,
                AtomicOp::Rem if *y == 0 => None,
                AtomicOp::Div => int_result(x.checked_div(*y)),
                AtomicOp::Rem => int_result(x.checked_rem(*y)),
                AtomicOp::Lt => one(Bool(x < y)),
                AtomicOp::Le => one(Bool(x <= y)),
                AtomicOp::Gt => one(Bool(x > y)),
                AtomicOp::Ge => one(Bool(x >= y)),
                _ => None,
            },
            (x, y) if x.is_int() && y.is_int() => match op {
                AtomicOp::Lt | AtomicOp::Le | AtomicOp::Gt | AtomicOp::Ge => both(),
                AtomicOp::Div | AtomicOp::Rem if *y == Int(0) => None,
                _ => one(AnyInt),
            },
            _ => None,
        },
    }
}

/// Applies `op` pointwise over every combination of operand values.
pub fn apply_op(op: AtomicOp, args: &[Val], budget: usize) -> Val {
    let mut out = Val::new();
    if args.iter().any(Val::is_empty) {
        return out;
    }
    let mut combo: Vec<&AbsValue> = Vec::with_capacity(args.len());
    fn rec<'a>(
        op: AtomicOp,
        args: &'a [Val],
        combo: &mut Vec<&'a AbsValue>,
        out: &mut Val,
        budget: usize,
    ) {
        if combo.len() == args.len() {
            if let Some(results) = prim(op, combo) {
                for r in results {
                    out.insert(r, budget);
                }
            }
            return;
        }
        for v in args[combo.len()].iter() {
            combo.push(v);
            rec(op, args, combo, out, budget);
            combo.pop();
        }
    }
    rec(op, args, &mut combo, &mut out, budget);
    out
}

/// Display helpers that resolve method ids against a program.
pub struct DisplayStmtPos<'a>(pub &'a Program, pub &'a StmtPos);
pub struct DisplayFp<'a>(pub &'a Program, pub &'a FramePointer);
pub struct DisplayOp<'a>(pub &'a Program, pub &'a ObjectPointer);
pub struct DisplayAddr<'a>(pub &'a Program, pub &'a Addr);
pub struct DisplayVal<'a>(pub &'a Program, pub &'a Val);

impl fmt::Display for DisplayStmtPos<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.0.method_ref(self.1.method), self.1.index)
    }
}

fn write_ctx(f: &mut fmt::Formatter<'_>, p: &Program, ctx: &[StmtPos]) -> fmt::Result {
    f.write_str("[")?;
    for (i, s) in ctx.iter().enumerate() {
        if i > 0 {
            f.write_str(" ")?;
        }
        write!(f, "{}", DisplayStmtPos(p, s))?;
    }
    f.write_str("]")
}

impl fmt::Display for DisplayFp<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.method_ref(self.1.method))?;
        write_ctx(f, self.0, &self.1.ctx)
    }
}

impl fmt::Display for DisplayOp<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.1.site {
            AllocSite::Stmt(s) => write!(f, "new {}", DisplayStmtPos(self.0, s))?,
            AllocSite::Framework(c) => write!(f, "framework {c}")?,
        }
        write_ctx(f, self.0, &self.1.ctx)
    }
}

impl fmt::Display for DisplayAddr<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.1 {
            Addr::Reg(fp, r) => write!(f, "{} {r}", DisplayFp(self.0, fp)),
            Addr::Field(op, field) => write!(f, "<{}>.{field}", DisplayOp(self.0, op)),
        }
    }
}

impl fmt::Display for DisplayVal<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, v) in self.1.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            match v {
                AbsValue::Object(op, c) => write!(f, "{c}<{}>", DisplayOp(self.0, op))?,
                AbsValue::Str(s) => crate::ir::sexp::write_string_literal(f, s)?,
                AbsValue::AnyStr => f.write_str("AnyStr")?,
                AbsValue::Int(n) => write!(f, "{n}")?,
                AbsValue::AnyInt => f.write_str("AnyInt")?,
                AbsValue::Bool(b) => write!(f, "{b}")?,
                AbsValue::Null => f.write_str("null")?,
                AbsValue::Void => f.write_str("void")?,
            }
        }
        f.write_str("}")
    }
}
