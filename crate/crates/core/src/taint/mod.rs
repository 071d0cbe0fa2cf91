//! Taint categories, API summaries and source-to-sink findings.

mod findings;

pub use findings::{
    extract_findings, unexplained_app_taint, unexplained_taint, Segment, SiteRef, TaintFinding,
};

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Serialize, Serializer};

use crate::glob::glob_match;
use crate::machine::domain::{AbsValue, Val};

macro_rules! taint_vals {
    ($($name:ident),* $(,)?) => {
        /// A taint category.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
        #[repr(u8)]
        pub enum TaintVal {
            $($name),*
        }

        impl TaintVal {
            pub const ALL: &'static [TaintVal] = &[$(TaintVal::$name),*];

            pub fn name(self) -> &'static str {
                match self {
                    $(TaintVal::$name => stringify!($name)),*
                }
            }
        }
    };
}

taint_vals!(
    Location,
    FileSystem,
    Sms,
    Phone,
    Voice,
    DeviceID,
    Network,
    ID,
    TimeOrDate,
    Display,
    Reflection,
    IPC,
    BrowserBookmark,
    SdCard,
    BrowserHistory,
    Thread,
    Picture,
    Contact,
    Sensor,
    Account,
    Media,
);

impl TaintVal {
    pub fn from_name(s: &str) -> Option<TaintVal> {
        TaintVal::ALL.iter().copied().find(|t| t.name() == s)
    }

    fn bit(self) -> u32 {
        1 << (self as u8)
    }
}

impl fmt::Display for TaintVal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A set of taint categories, stored as a bit set.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TaintSet(u32);

impl TaintSet {
    pub const EMPTY: TaintSet = TaintSet(0);

    pub fn single(t: TaintVal) -> Self {
        TaintSet(t.bit())
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, t: TaintVal) -> bool {
        self.0 & t.bit() != 0
    }

    pub fn insert(&mut self, t: TaintVal) {
        self.0 |= t.bit();
    }

    pub fn union(self, other: TaintSet) -> TaintSet {
        TaintSet(self.0 | other.0)
    }

    pub fn intersect(self, other: TaintSet) -> TaintSet {
        TaintSet(self.0 & other.0)
    }

    pub fn is_subset(self, other: TaintSet) -> bool {
        self.0 & !other.0 == 0
    }

    /// Joins `other` in; returns whether `self` grew.
    pub fn join(&mut self, other: TaintSet) -> bool {
        let before = self.0;
        self.0 |= other.0;
        self.0 != before
    }

    pub fn iter(self) -> impl Iterator<Item = TaintVal> {
        TaintVal::ALL
            .iter()
            .copied()
            .filter(move |t| self.contains(*t))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }
}

impl FromIterator<TaintVal> for TaintSet {
    fn from_iter<I: IntoIterator<Item = TaintVal>>(iter: I) -> Self {
        let mut s = TaintSet::EMPTY;
        for t in iter {
            s.insert(t);
        }
        s
    }
}

impl fmt::Display for TaintSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, t) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            f.write_str(t.name())?;
        }
        f.write_str("}")
    }
}

impl Serialize for TaintSet {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.iter())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SinkKind {
    Network,
    File,
    Intent,
    Sms,
    Log,
}

impl SinkKind {
    pub const ALL: [SinkKind; 5] = [
        SinkKind::Network,
        SinkKind::File,
        SinkKind::Intent,
        SinkKind::Sms,
        SinkKind::Log,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SinkKind::Network => "network",
            SinkKind::File => "file",
            SinkKind::Intent => "intent",
            SinkKind::Sms => "sms",
            SinkKind::Log => "log",
        }
    }

    pub fn from_name(s: &str) -> Option<SinkKind> {
        SinkKind::ALL.iter().copied().find(|k| k.name() == s)
    }
}

impl fmt::Display for SinkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Role {
    Source(TaintSet),
    /// `None` accepts every category.
    Sink {
        kind: SinkKind,
        categories: Option<TaintSet>,
    },
    Propagate,
    Neutral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RetAbstraction {
    AnyString,
    AnyInt,
    Null,
    Void,
}

impl RetAbstraction {
    pub fn value(self) -> AbsValue {
        match self {
            RetAbstraction::AnyString => AbsValue::AnyStr,
            RetAbstraction::AnyInt => AbsValue::AnyInt,
            RetAbstraction::Null => AbsValue::Null,
            RetAbstraction::Void => AbsValue::Void,
        }
    }

    fn keyword(self) -> &'static str {
        match self {
            RetAbstraction::AnyString => "any-string",
            RetAbstraction::AnyInt => "any-int",
            RetAbstraction::Null => "null",
            RetAbstraction::Void => "void",
        }
    }
}

/// A model of one framework API (or a family, via globs).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiSummary {
    pub class_pattern: String,
    pub method_pattern: String,
    pub roles: Vec<Role>,
    pub ret: RetAbstraction,
    pub permissions: BTreeSet<String>,
}

impl ApiSummary {
    pub fn matches(&self, class: &str, method: &str) -> bool {
        glob_match(&self.class_pattern, class) && glob_match(&self.method_pattern, method)
    }
}

impl fmt::Display for ApiSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "summary {} {} role=",
            self.class_pattern, self.method_pattern
        )?;
        for (i, r) in self.roles.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            match r {
                Role::Source(cats) => {
                    f.write_str("source:")?;
                    write_cats(f, *cats)?;
                }
                Role::Sink { kind, categories } => {
                    write!(f, "sink:{kind}:")?;
                    match categories {
                        Some(c) => write_cats(f, *c)?,
                        None => f.write_str("*")?,
                    }
                }
                Role::Propagate => f.write_str("propagate")?,
                Role::Neutral => f.write_str("neutral")?,
            }
        }
        write!(f, " ret={} perms=", self.ret.keyword())?;
        if self.permissions.is_empty() {
            f.write_str("-")
        } else {
            for (i, p) in self.permissions.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                f.write_str(p)?;
            }
            Ok(())
        }
    }
}

fn write_cats(f: &mut fmt::Formatter<'_>, cats: TaintSet) -> fmt::Result {
    for (i, t) in cats.iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        f.write_str(t.name())?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("summary table line {line}: {message}")]
pub struct SummaryParseError {
    pub line: usize,
    pub message: String,
}

/// Effect of applying one or more summaries at a call.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SummaryOutcome {
    pub ret_val: Val,
    pub ret_taint: TaintSet,
    pub sink_hits: BTreeSet<(TaintVal, SinkKind)>,
    /// Categories introduced by source roles.
    pub sources: TaintSet,
}

/// Applies `s` to the given argument values and taints (receiver first for
/// instance calls).
pub fn apply_summary(s: &ApiSummary, _arg_vals: &[Val], arg_taints: &[TaintSet]) -> SummaryOutcome {
    let incoming = arg_taints.iter().fold(TaintSet::EMPTY, |a, t| a.union(*t));
    let mut out = SummaryOutcome {
        ret_val: Val::singleton(s.ret.value()),
        ..SummaryOutcome::default()
    };
    for role in &s.roles {
        match role {
            Role::Source(cats) => {
                out.ret_taint.join(*cats);
                out.sources.join(*cats);
            }
            Role::Propagate => {
                out.ret_taint.join(incoming);
            }
            Role::Sink { kind, categories } => {
                let hit = match categories {
                    Some(c) => incoming.intersect(*c),
                    None => incoming,
                };
                for t in hit.iter() {
                    out.sink_hits.insert((t, *kind));
                }
            }
            Role::Neutral => {}
        }
    }
    out
}

/// The set of API summaries in effect for an analysis.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ApiSummaryTable {
    pub summaries: Vec<ApiSummary>,
}

pub const DEFAULT_SUMMARIES: &str = include_str!("../../data/android.summaries");

impl ApiSummaryTable {
    pub fn new() -> Self {
        ApiSummaryTable::default()
    }

    /// The shipped table covering the framework APIs used by the corpus.
    pub fn android_default() -> Self {
        ApiSummaryTable::parse(DEFAULT_SUMMARIES).expect("shipped summary table parses")
    }

    /// Every summary whose patterns match `class.method`, in table order.
    pub fn matching<'a>(
        &'a self,
        class: &'a str,
        method: &'a str,
    ) -> impl Iterator<Item = &'a ApiSummary> + 'a {
        self.summaries
            .iter()
            .filter(move |s| s.matches(class, method))
    }

    pub fn has_match(&self, class: &str, method: &str) -> bool {
        self.matching(class, method).next().is_some()
    }

    /// Parses the line-oriented table format. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, SummaryParseError> {
        let mut summaries = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fail = |message: &str| SummaryParseError {
                line: n + 1,
                message: message.to_string(),
            };
            let mut words = line.split_whitespace();
            if words.next() != Some("summary") {
                return Err(fail("expected `summary`"));
            }
            let class_pattern = words.next().ok_or_else(|| fail("missing class pattern"))?;
            let method_pattern = words.next().ok_or_else(|| fail("missing method"))?;
            let mut fields: BTreeMap<&str, &str> = BTreeMap::new();
            for w in words {
                let (k, v) = w
                    .split_once('=')
                    .ok_or_else(|| fail("expected key=value"))?;
                if fields.insert(k, v).is_some() {
                    return Err(fail("repeated key"));
                }
            }
            let mut roles = Vec::new();
            for r in fields
                .remove("role")
                .ok_or_else(|| fail("missing role="))?
                .split(';')
            {
                roles.push(parse_role(r).ok_or_else(|| fail("bad role"))?);
            }
            let ret = match fields.remove("ret").unwrap_or("void") {
                "any-string" => RetAbstraction::AnyString,
                "any-int" => RetAbstraction::AnyInt,
                "null" => RetAbstraction::Null,
                "void" => RetAbstraction::Void,
                _ => return Err(fail("bad ret")),
            };
            let permissions = match fields.remove("perms").unwrap_or("") {
                "" | "-" => BTreeSet::new(),
                ps => ps.split(',').map(String::from).collect(),
            };
            if permissions.iter().any(String::is_empty) {
                return Err(fail("empty permission name"));
            }
            if let Some(k) = fields.keys().next() {
                return Err(fail(&alloc::format!("unknown key `{k}`")));
            }
            summaries.push(ApiSummary {
                class_pattern: class_pattern.into(),
                method_pattern: method_pattern.into(),
                roles,
                ret,
                permissions,
            });
        }
        Ok(ApiSummaryTable { summaries })
    }
}

fn parse_cats(s: &str) -> Option<TaintSet> {
    let mut set = TaintSet::EMPTY;
    for c in s.split(',') {
        set.insert(TaintVal::from_name(c)?);
    }
    Some(set)
}

fn parse_role(s: &str) -> Option<Role> {
    let mut parts = s.split(':');
    match parts.next()? {
        "source" => {
            let cats = parse_cats(parts.next()?)?;
            parts.next().is_none().then_some(Role::Source(cats))
        }
        "sink" => {
            let kind = SinkKind::from_name(parts.next()?)?;
            let categories = match parts.next()? {
                "*" => None,
                cats => Some(parse_cats(cats)?),
            };
            parts
                .next()
                .is_none()
                .then_some(Role::Sink { kind, categories })
        }
        "propagate" => parts.next().is_none().then_some(Role::Propagate),
        "neutral" => parts.next().is_none().then_some(Role::Neutral),
        _ => None,
    }
}

impl fmt::Display for ApiSummaryTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.summaries {
            writeln!(f, "{s}")?;
        }
        Ok(())
    }
}
