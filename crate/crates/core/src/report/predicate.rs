//! Analyst predicates: `&&`-joined atoms such as
//! `classIs(kitty/*) && taintHas(Location) && lineIn(10, 40)`.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::glob::glob_match;
use crate::taint::{SinkKind, TaintFinding, TaintVal};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Atom {
    ClassIs(String),
    MethodIs(String),
    LineIn(u32, u32),
    TaintHas(TaintVal),
    SinkKindIs(SinkKind),
    PermissionIs(String),
    UnitIs(String),
}

/// A conjunction of atoms; the empty conjunction accepts everything.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Predicate {
    pub atoms: Vec<Atom>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("bad predicate at {pos}: {message}")]
pub struct PredicateError {
    pub pos: usize,
    pub message: String,
}

impl Atom {
    /// Class and method atoms match the trigger, the source or the sink;
    /// `lineIn` matches the source or sink line.
    pub fn accepts(&self, f: &TaintFinding) -> bool {
        let methods = [&f.trigger, &f.source.method, &f.sink.method];
        match self {
            Atom::ClassIs(g) => methods.iter().any(|m| glob_match(g, m.class.as_str())),
            Atom::MethodIs(g) => methods.iter().any(|m| glob_match(g, m.name.as_str())),
            Atom::LineIn(lo, hi) => [f.source.line, f.sink.line]
                .iter()
                .any(|l| lo <= l && l <= hi),
            Atom::TaintHas(t) => f.category == *t,
            Atom::SinkKindIs(k) => f.sink_kind == *k,
            Atom::PermissionIs(p) => f.sink_permissions.contains(p),
            Atom::UnitIs(g) => glob_match(g, &f.unit),
        }
    }
}

impl Predicate {
    pub fn accepts(&self, f: &TaintFinding) -> bool {
        self.atoms.iter().all(|a| a.accepts(f))
    }

    pub fn is_trivial(&self) -> bool {
        self.atoms.is_empty()
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::ClassIs(g) => write!(f, "classIs({g})"),
            Atom::MethodIs(g) => write!(f, "methodIs({g})"),
            Atom::LineIn(lo, hi) => write!(f, "lineIn({lo}, {hi})"),
            Atom::TaintHas(t) => write!(f, "taintHas({t})"),
            Atom::SinkKindIs(k) => write!(f, "sinkKindIs({})", k.name()),
            Atom::PermissionIs(p) => write!(f, "permissionIs({p})"),
            Atom::UnitIs(u) => write!(f, "unitIs({u})"),
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(" && ")?;
            }
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

fn err(pos: usize, message: impl Into<String>) -> PredicateError {
    PredicateError {
        pos,
        message: message.into(),
    }
}

fn parse_atom(text: &str, pos: usize) -> Result<Atom, PredicateError> {
    let open = text
        .find('(')
        .ok_or_else(|| err(pos, "expected `name(args)`"))?;
    if !text.ends_with(')') {
        return Err(err(pos + text.len(), "expected `)`"));
    }
    let name = text[..open].trim();
    let arg = text[open + 1..text.len() - 1].trim();
    let arg_pos = pos + open + 1;
    let word = |what: &str| {
        if arg.is_empty()
            || arg.contains(|c: char| c.is_whitespace() || c == ',' || c == '(' || c == ')')
        {
            Err(err(
                arg_pos,
                alloc::format!("{name} expects a single {what}"),
            ))
        } else {
            Ok(arg.to_string())
        }
    };
    Ok(match name {
        "classIs" => Atom::ClassIs(word("glob")?),
        "methodIs" => Atom::MethodIs(word("glob")?),
        "unitIs" => Atom::UnitIs(word("glob")?),
        "permissionIs" => Atom::PermissionIs(word("permission")?),
        "taintHas" => {
            let w = word("category")?;
            Atom::TaintHas(
                TaintVal::from_name(&w)
                    .ok_or_else(|| err(arg_pos, alloc::format!("unknown category {w}")))?,
            )
        }
        "sinkKindIs" => {
            let w = word("sink kind")?;
            Atom::SinkKindIs(
                SinkKind::from_name(&w)
                    .ok_or_else(|| err(arg_pos, alloc::format!("unknown sink kind {w}")))?,
            )
        }
        "lineIn" => {
            let parts: Vec<&str> = arg.split(',').map(str::trim).collect();
            let [lo, hi] = parts[..] else {
                return Err(err(arg_pos, "lineIn expects two line numbers"));
            };
            let num = |s: &str| {
                s.parse::<u32>()
                    .map_err(|_| err(arg_pos, alloc::format!("bad line number {s:?}")))
            };
            let (lo, hi) = (num(lo)?, num(hi)?);
            if lo > hi {
                return Err(err(arg_pos, "lineIn needs lo <= hi"));
            }
            Atom::LineIn(lo, hi)
        }
        other => return Err(err(pos, alloc::format!("unknown atom {other:?}"))),
    })
}

impl FromStr for Predicate {
    type Err = PredicateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut atoms = Vec::new();
        if s.trim().is_empty() {
            return Ok(Predicate { atoms });
        }
        let mut pos = 0;
        for part in s.split("&&") {
            let lead = part.len() - part.trim_start().len();
            atoms.push(parse_atom(part.trim(), pos + lead)?);
            pos += part.len() + 2;
        }
        Ok(Predicate { atoms })
    }
}
