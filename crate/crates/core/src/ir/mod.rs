//! The object-oriented bytecode IR: syntax, validated programs and class
//! hierarchy queries.

mod parse;
mod print;
pub mod sexp;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::Serialize;

pub use parse::parse_program;
pub use print::print_program;
pub use sexp::Pos;

macro_rules! name_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(s: impl Into<String>) -> Self {
                $name(s.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name(s.into())
            }
        }
    };
}

name_type!(
    /// A slash-separated class name such as `java/lang/Object`.
    ClassName
);
name_type!(FieldName);
name_type!(MethodName);
name_type!(
    /// A frame-local register. `ret` and `exn` are the distinguished
    /// return-value and caught-exception registers.
    Reg
);
name_type!(Label);

pub const ROOT_CLASS: &str = "java/lang/Object";
pub const STRING_CLASS: &str = "java/lang/String";

/// Library classes every program may reference without declaring them,
/// with their superclasses.
pub const BUILTIN_CLASSES: &[(&str, Option<&str>)] = &[
    (ROOT_CLASS, None),
    (STRING_CLASS, Some(ROOT_CLASS)),
    ("java/lang/Throwable", Some(ROOT_CLASS)),
    ("java/lang/Exception", Some("java/lang/Throwable")),
    ("java/lang/RuntimeException", Some("java/lang/Exception")),
];

pub fn is_builtin_class(name: &str) -> bool {
    BUILTIN_CLASSES.iter().any(|(c, _)| *c == name)
}

impl Reg {
    pub fn ret() -> Reg {
        Reg::new("ret")
    }

    pub fn exn() -> Reg {
        Reg::new("exn")
    }

    pub fn this() -> Reg {
        Reg::new("this")
    }

    /// Register receiving the `i`th declared parameter.
    pub fn param(i: usize) -> Reg {
        Reg(alloc::format!("param{i}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Attribute {
    Public,
    Private,
    Protected,
    Final,
    Abstract,
    Static,
}

impl Attribute {
    pub fn keyword(self) -> &'static str {
        match self {
            Attribute::Public => "public",
            Attribute::Private => "private",
            Attribute::Protected => "protected",
            Attribute::Final => "final",
            Attribute::Abstract => "abstract",
            Attribute::Static => "static",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Attribute> {
        Some(match s {
            "public" => Attribute::Public,
            "private" => Attribute::Private,
            "protected" => Attribute::Protected,
            "final" => Attribute::Final,
            "abstract" => Attribute::Abstract,
            "static" => Attribute::Static,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Type {
    Int,
    Byte,
    Char,
    Boolean,
    /// Only valid as a method return type.
    Void,
    Class(ClassName),
}

impl Type {
    pub fn is_reference(&self) -> bool {
        matches!(self, Type::Class(_))
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Int => f.write_str("int"),
            Type::Byte => f.write_str("byte"),
            Type::Char => f.write_str("char"),
            Type::Boolean => f.write_str("boolean"),
            Type::Void => f.write_str("void"),
            Type::Class(c) => write!(f, "{c}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum AtomicOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Neg,
    Not,
    And,
    Or,
    Xor,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl AtomicOp {
    pub const ALL: [AtomicOp; 16] = [
        AtomicOp::Add,
        AtomicOp::Sub,
        AtomicOp::Mul,
        AtomicOp::Div,
        AtomicOp::Rem,
        AtomicOp::Neg,
        AtomicOp::Not,
        AtomicOp::And,
        AtomicOp::Or,
        AtomicOp::Xor,
        AtomicOp::Lt,
        AtomicOp::Le,
        AtomicOp::Gt,
        AtomicOp::Ge,
        AtomicOp::Eq,
        AtomicOp::Ne,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            AtomicOp::Add => "add",
            AtomicOp::Sub => "sub",
            AtomicOp::Mul => "mul",
            AtomicOp::Div => "div",
            AtomicOp::Rem => "rem",
            AtomicOp::Neg => "neg",
            AtomicOp::Not => "not",
            AtomicOp::And => "and",
            AtomicOp::Or => "or",
            AtomicOp::Xor => "xor",
            AtomicOp::Lt => "lt",
            AtomicOp::Le => "le",
            AtomicOp::Gt => "gt",
            AtomicOp::Ge => "ge",
            AtomicOp::Eq => "eq",
            AtomicOp::Ne => "ne",
        }
    }

    pub fn from_keyword(s: &str) -> Option<AtomicOp> {
        AtomicOp::ALL.iter().copied().find(|op| op.keyword() == s)
    }

    pub fn arity(self) -> usize {
        match self {
            AtomicOp::Neg | AtomicOp::Not => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AExp {
    This,
    True,
    False,
    Null,
    Void,
    Name(Reg),
    Int(i64),
    Str(String),
    Op(AtomicOp, Vec<AExp>),
    InstanceOf(alloc::boxed::Box<AExp>, ClassName),
}

impl AExp {
    /// Registers read when evaluating this expression.
    pub fn registers(&self, out: &mut Vec<Reg>) {
        match self {
            AExp::This => out.push(Reg::this()),
            AExp::Name(r) => out.push(r.clone()),
            AExp::Op(_, args) => args.iter().for_each(|a| a.registers(out)),
            AExp::InstanceOf(a, _) => a.registers(out),
            _ => {}
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InvokeKind {
    Static,
    Direct,
    Virtual,
    Interface,
    Super,
}

impl InvokeKind {
    pub fn keyword(self) -> &'static str {
        match self {
            InvokeKind::Static => "invoke-static",
            InvokeKind::Direct => "invoke-direct",
            InvokeKind::Virtual => "invoke-virtual",
            InvokeKind::Interface => "invoke-interface",
            InvokeKind::Super => "invoke-super",
        }
    }

    pub fn from_keyword(s: &str) -> Option<InvokeKind> {
        Some(match s {
            "invoke-static" => InvokeKind::Static,
            "invoke-direct" => InvokeKind::Direct,
            "invoke-virtual" => InvokeKind::Virtual,
            "invoke-interface" => InvokeKind::Interface,
            "invoke-super" => InvokeKind::Super,
            _ => return None,
        })
    }

    pub fn has_receiver(self) -> bool {
        self != InvokeKind::Static
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CExp {
    New(ClassName),
    /// `class` is the statically named class of the callee (`Class.method`
    /// in the source syntax).
    Invoke {
        kind: InvokeKind,
        args: Vec<AExp>,
        arg_types: Vec<Type>,
        class: ClassName,
        method: MethodName,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stmt {
    Label(Label),
    Nop,
    Line(u32),
    Goto(Label),
    If(AExp, Label),
    AssignAtomic(Reg, AExp),
    AssignComplex(Reg, CExp),
    FieldPut {
        object: AExp,
        field: FieldName,
        value: AExp,
    },
    FieldGet {
        dest: Reg,
        object: AExp,
        field: FieldName,
    },
    PushHandler(ClassName, Label),
    PopHandler,
    Throw(AExp),
    Return(AExp),
    /// Copies `ret` into a register after a call returns. Never parsed;
    /// the machines synthesize it for `(assign r (invoke ...))`.
    MoveFromRet(Reg),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldDef {
    pub attributes: BTreeSet<Attribute>,
    pub name: FieldName,
    pub ty: Type,
}

#[derive(Debug, Clone)]
pub struct MethodDef {
    pub attributes: BTreeSet<Attribute>,
    pub name: MethodName,
    pub params: Vec<Type>,
    pub ret: Type,
    pub throws: Vec<ClassName>,
    pub limit: u32,
    pub body: Vec<Stmt>,
    /// Source position of each body statement; ignored by equality.
    pub positions: Vec<Pos>,
}

impl PartialEq for MethodDef {
    fn eq(&self, other: &Self) -> bool {
        self.attributes == other.attributes
            && self.name == other.name
            && self.params == other.params
            && self.ret == other.ret
            && self.throws == other.throws
            && self.limit == other.limit
            && self.body == other.body
    }
}

impl MethodDef {
    pub fn is_static(&self) -> bool {
        self.attributes.contains(&Attribute::Static)
    }

    pub fn is_abstract(&self) -> bool {
        self.attributes.contains(&Attribute::Abstract)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassDef {
    pub attributes: BTreeSet<Attribute>,
    pub name: ClassName,
    pub super_name: ClassName,
    pub fields: Vec<FieldDef>,
    pub methods: Vec<MethodDef>,
}

/// Stable method identity: declaring class, name and parameter types.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct MethodRef {
    pub class: ClassName,
    pub name: MethodName,
    pub params: Vec<Type>,
}

impl MethodRef {
    pub fn new(class: &str, name: &str, params: Vec<Type>) -> Self {
        MethodRef {
            class: class.into(),
            name: name.into(),
            params,
        }
    }
}

impl fmt::Display for MethodRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}(", self.class, self.name)?;
        for (i, p) in self.params.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{p}")?;
        }
        f.write_str(")")
    }
}

/// Dense index of a method within a [`Program`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct MethodId(pub u32);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseErrorKind {
    #[error("unclosed list")]
    UnclosedList,
    #[error("unexpected ')'")]
    UnexpectedClose,
    #[error("unterminated string literal")]
    UnterminatedString,
    #[error("bad escape in string literal")]
    BadEscape,
    #[error("expected {0}")]
    Expected(&'static str),
    #[error("unknown statement `{0}`")]
    UnknownStatement(String),
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("wrong number of operands for `{0}`")]
    Arity(String),
    #[error("bad register name `{0}`")]
    BadRegister(String),
    #[error("bad integer `{0}`")]
    BadInteger(String),
    #[error("duplicate class `{0}`")]
    DuplicateClass(String),
    #[error("duplicate method `{0}`")]
    DuplicateMethod(String),
    #[error("duplicate field `{0}`")]
    DuplicateField(String),
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("dangling label `{0}`")]
    DanglingLabel(String),
    #[error("undeclared class `{0}`")]
    UndeclaredClass(String),
    #[error("hierarchy cycle through `{0}`")]
    HierarchyCycle(String),
    #[error("`{0}` redeclares a library class")]
    BuiltinRedeclared(String),
    #[error("empty body in non-abstract method `{0}`")]
    EmptyBody(String),
    #[error("limit {limit} is below the {params} declared parameters")]
    LimitTooSmall { limit: u32, params: usize },
    #[error("line numbers must be positive")]
    NonPositiveLine,
    #[error("`void` is only valid as a return type")]
    VoidType,
    #[error("invoke argument types do not match arguments")]
    InvokeTypes,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{pos}: {kind}")]
pub struct ParseError {
    pub pos: Pos,
    pub kind: ParseErrorKind,
}

impl ParseError {
    pub fn new(pos: Pos, kind: ParseErrorKind) -> Self {
        ParseError { pos, kind }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IrError {
    #[error("unknown label `{label}` in {method}")]
    UnknownLabel { method: MethodRef, label: Label },
    #[error("unknown class `{0}`")]
    UnknownClass(ClassName),
    #[error("cannot resolve {class}.{name} ({kind:?})")]
    Resolve {
        class: ClassName,
        name: MethodName,
        kind: InvokeKind,
    },
    #[error("unknown method {0}")]
    UnknownMethod(MethodRef),
}

/// A parsed and validated program. Immutable once built.
#[derive(Debug, Clone)]
pub struct Program {
    classes: BTreeMap<ClassName, ClassDef>,
    class_order: Vec<ClassName>,
    methods: Vec<(ClassName, usize)>,
    method_refs: Vec<MethodRef>,
    method_index: BTreeMap<MethodRef, MethodId>,
    labels: BTreeMap<(MethodId, Label), usize>,
    /// Per method, the line reported for each statement index.
    lines: Vec<Vec<u32>>,
}

impl PartialEq for Program {
    fn eq(&self, other: &Self) -> bool {
        self.class_order == other.class_order && self.classes == other.classes
    }
}

impl Program {
    /// Builds the lookup tables. Callers must have validated `classes`.
    fn from_classes(classes: Vec<ClassDef>) -> Program {
        let mut program = Program {
            classes: BTreeMap::new(),
            class_order: Vec::new(),
            methods: Vec::new(),
            method_refs: Vec::new(),
            method_index: BTreeMap::new(),
            labels: BTreeMap::new(),
            lines: Vec::new(),
        };
        for class in classes {
            for (i, m) in class.methods.iter().enumerate() {
                let id = MethodId(program.methods.len() as u32);
                let mref = MethodRef {
                    class: class.name.clone(),
                    name: m.name.clone(),
                    params: m.params.clone(),
                };
                program.methods.push((class.name.clone(), i));
                program.method_index.insert(mref.clone(), id);
                program.method_refs.push(mref);
                let mut lines = Vec::with_capacity(m.body.len() + 1);
                let mut current = None;
                for (idx, s) in m.body.iter().enumerate() {
                    if let Stmt::Label(l) = s {
                        program.labels.insert((id, l.clone()), idx);
                    }
                    if let Stmt::Line(n) = s {
                        current = Some(*n);
                    }
                    let fallback = m.positions.get(idx).map(|p| p.line).unwrap_or(0);
                    lines.push(current.unwrap_or(fallback));
                }
                lines.push(current.unwrap_or(0));
                program.lines.push(lines);
            }
            program.class_order.push(class.name.clone());
            program.classes.insert(class.name.clone(), class);
        }
        program
    }

    pub fn classes(&self) -> impl Iterator<Item = &ClassDef> {
        self.class_order.iter().map(move |c| &self.classes[c])
    }

    pub fn class(&self, name: &ClassName) -> Option<&ClassDef> {
        self.classes.get(name)
    }

    pub fn is_declared(&self, name: &str) -> bool {
        self.classes.contains_key(&ClassName::from(name)) || is_builtin_class(name)
    }

    pub fn method_count(&self) -> usize {
        self.methods.len()
    }

    pub fn method_ids(&self) -> impl Iterator<Item = MethodId> {
        (0..self.methods.len() as u32).map(MethodId)
    }

    pub fn method(&self, id: MethodId) -> &MethodDef {
        let (class, i) = &self.methods[id.0 as usize];
        &self.classes[class].methods[*i]
    }

    pub fn method_ref(&self, id: MethodId) -> &MethodRef {
        &self.method_refs[id.0 as usize]
    }

    pub fn method_id(&self, m: &MethodRef) -> Option<MethodId> {
        self.method_index.get(m).copied()
    }

    /// Looks up a method by class and name when the name is not overloaded.
    pub fn method_by_name(&self, class: &str, name: &str) -> Option<MethodId> {
        let mut found = self
            .method_index
            .iter()
            .filter(|(r, _)| r.class.as_str() == class && r.name.as_str() == name);
        let first = found.next()?;
        if found.next().is_some() {
            return None;
        }
        Some(*first.1)
    }

    /// The reported line of statement `index` of method `id`: the most recent
    /// `(line n)` at or above it, falling back to its source line.
    pub fn line_at(&self, id: MethodId, index: usize) -> u32 {
        let lines = &self.lines[id.0 as usize];
        lines[index.min(lines.len() - 1)]
    }

    pub fn source_pos(&self, id: MethodId, index: usize) -> Option<Pos> {
        self.method(id).positions.get(index).copied()
    }

    /// Index of the first statement after `(label l)` in method `m`.
    pub fn label_target(&self, m: MethodId, l: &Label) -> Option<usize> {
        self.labels.get(&(m, l.clone())).map(|i| i + 1)
    }

    /// The statements following `(label l)` in method `m`.
    pub fn statements_at(&self, m: &MethodRef, l: &Label) -> Result<&[Stmt], IrError> {
        let unknown = || IrError::UnknownLabel {
            method: m.clone(),
            label: l.clone(),
        };
        let id = self.method_id(m).ok_or_else(unknown)?;
        let start = self.label_target(id, l).ok_or_else(unknown)?;
        Ok(&self.method(id).body[start..])
    }

    /// Direct superclass; `None` for the root class.
    pub fn superclass(&self, c: &ClassName) -> Result<Option<ClassName>, IrError> {
        if let Some(def) = self.classes.get(c) {
            return Ok(Some(def.super_name.clone()));
        }
        match BUILTIN_CLASSES.iter().find(|(b, _)| *b == c.as_str()) {
            Some((_, sup)) => Ok(sup.map(ClassName::from)),
            None => Err(IrError::UnknownClass(c.clone())),
        }
    }

    /// `c` followed by each of its ancestors up to the root.
    pub fn ancestry(&self, c: &ClassName) -> Result<Vec<ClassName>, IrError> {
        let mut out = Vec::new();
        let mut cur = Some(c.clone());
        while let Some(name) = cur {
            let next = self.superclass(&name)?;
            out.push(name);
            cur = next;
        }
        Ok(out)
    }

    /// True iff `sup` is reachable from `sub` along zero or more `extends` edges.
    pub fn is_subclass(&self, sub: &ClassName, sup: &ClassName) -> Result<bool, IrError> {
        if !self.is_declared(sup.as_str()) {
            return Err(IrError::UnknownClass(sup.clone()));
        }
        Ok(self.ancestry(sub)?.iter().any(|c| c == sup))
    }

    /// Fields of `c` and all its declared ancestors, most-derived first.
    pub fn all_fields(&self, c: &ClassName) -> Vec<&FieldDef> {
        let mut out = Vec::new();
        let mut cur = self.classes.get(c);
        while let Some(def) = cur {
            out.extend(def.fields.iter());
            cur = self.classes.get(&def.super_name);
        }
        out
    }

    /// Method resolution. Virtual and interface calls walk up from `class`
    /// (the receiver's dynamic class); super calls start at the superclass
    /// of `class`; static and direct calls start at `class` itself.
    pub fn resolve_method(
        &self,
        class: &ClassName,
        name: &MethodName,
        params: &[Type],
        kind: InvokeKind,
    ) -> Result<MethodId, IrError> {
        let err = || IrError::Resolve {
            class: class.clone(),
            name: name.clone(),
            kind,
        };
        let start = match kind {
            InvokeKind::Super => match self.superclass(class)? {
                Some(s) => s,
                None => return Err(err()),
            },
            _ => class.clone(),
        };
        for c in self.ancestry(&start)? {
            let Some(def) = self.classes.get(&c) else {
                continue;
            };
            if let Some(i) = def
                .methods
                .iter()
                .position(|m| &m.name == name && m.params.as_slice() == params)
            {
                if def.methods[i].is_abstract() {
                    continue;
                }
                let mref = MethodRef {
                    class: c.clone(),
                    name: name.clone(),
                    params: params.to_vec(),
                };
                return self.method_id(&mref).ok_or_else(err);
            }
        }
        Err(err())
    }
}

#[cfg(test)]
mod tests;
