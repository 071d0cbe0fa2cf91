//! Canonical printer. Output re-parses to a structurally equal program.

use alloc::string::String;
use core::fmt::{self, Write};

use super::sexp::write_string_literal;
use super::*;

impl fmt::Display for AExp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AExp::This => f.write_str("this"),
            AExp::True => f.write_str("true"),
            AExp::False => f.write_str("false"),
            AExp::Null => f.write_str("null"),
            AExp::Void => f.write_str("void"),
            AExp::Name(r) => write!(f, "{r}"),
            AExp::Int(n) => write!(f, "{n}"),
            AExp::Str(s) => write_string_literal(f, s),
            AExp::Op(op, args) => {
                write!(f, "({}", op.keyword())?;
                for a in args {
                    write!(f, " {a}")?;
                }
                f.write_str(")")
            }
            AExp::InstanceOf(a, c) => write!(f, "(instance-of {a} {c})"),
        }
    }
}

fn write_list<T: fmt::Display>(f: &mut impl Write, items: &[T]) -> fmt::Result {
    f.write_char('(')?;
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            f.write_char(' ')?;
        }
        write!(f, "{item}")?;
    }
    f.write_char(')')
}

impl fmt::Display for CExp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CExp::New(c) => write!(f, "(new {c})"),
            CExp::Invoke {
                kind,
                args,
                arg_types,
                class,
                method,
            } => {
                write!(f, "({} ", kind.keyword())?;
                write_list(f, args)?;
                f.write_char(' ')?;
                write_list(f, arg_types)?;
                write!(f, " {class}.{method})")
            }
        }
    }
}

impl fmt::Display for Stmt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stmt::Label(l) => write!(f, "(label {l})"),
            Stmt::Nop => f.write_str("(nop)"),
            Stmt::Line(n) => write!(f, "(line {n})"),
            Stmt::Goto(l) => write!(f, "(goto {l})"),
            Stmt::If(c, l) => write!(f, "(if {c} (goto {l}))"),
            Stmt::AssignAtomic(r, a) => write!(f, "(assign {r} {a})"),
            Stmt::AssignComplex(r, c) => write!(f, "(assign {r} {c})"),
            Stmt::FieldPut {
                object,
                field,
                value,
            } => write!(f, "(field-put {object} {field} {value})"),
            Stmt::FieldGet {
                dest,
                object,
                field,
            } => {
                write!(f, "(field-get {dest} {object} {field})")
            }
            Stmt::PushHandler(c, l) => write!(f, "(push-handler {c} {l})"),
            Stmt::PopHandler => f.write_str("(pop-handler)"),
            Stmt::Throw(a) => write!(f, "(throw {a})"),
            Stmt::Return(a) => write!(f, "(return {a})"),
            Stmt::MoveFromRet(r) => write!(f, "(move-result {r})"),
        }
    }
}

fn write_attrs(f: &mut impl Write, attrs: &BTreeSet<Attribute>) -> fmt::Result {
    for a in attrs {
        write!(f, "{} ", a.keyword())?;
    }
    Ok(())
}

impl fmt::Display for MethodDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(method ")?;
        write_attrs(f, &self.attributes)?;
        write!(f, "{} ", self.name)?;
        write_list(f, &self.params)?;
        write!(f, " {} (throws", self.ret)?;
        for c in &self.throws {
            write!(f, " {c}")?;
        }
        write!(f, ") (limit {})", self.limit)?;
        for s in &self.body {
            write!(f, "\n      {s}")?;
        }
        f.write_str(")")
    }
}

impl fmt::Display for ClassDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_char('(')?;
        write_attrs(f, &self.attributes)?;
        write!(f, "class {} extends {}\n  (", self.name, self.super_name)?;
        for (i, field) in self.fields.iter().enumerate() {
            if i > 0 {
                f.write_str("\n   ")?;
            }
            f.write_str("(field ")?;
            write_attrs(f, &field.attributes)?;
            write!(f, "{} {})", field.name, field.ty)?;
        }
        f.write_str(")\n  (")?;
        for (i, m) in self.methods.iter().enumerate() {
            if i > 0 {
                f.write_str("\n   ")?;
            }
            write!(f, "{m}")?;
        }
        f.write_str("))")
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in self.classes() {
            writeln!(f, "{c}")?;
        }
        Ok(())
    }
}

pub fn print_program(p: &Program) -> String {
    let mut out = String::new();
    let _ = write!(out, "{p}");
    out
}
