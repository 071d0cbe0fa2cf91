//! Entry-point saturation.
//!
//! Each entry point is analyzed starting from the stores left by the
//! previous one; passes over a unit repeat until the stores stop growing,
//! and rounds over all units repeat the same way. The result models every
//! ordering of entry-point invocations without enumerating them.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::ir::{ClassName, MethodRef, Program, Reg, Type, STRING_CLASS};
use crate::machine::{AbsValue, Addr, FramePointer, ObjectPointer, Store, TaintStore, Val};
use crate::reach::{
    analyze_finite_with, analyze_pushdown, AnalysisConfig, AnalysisError, AnalysisResult, Audit,
    KStore, Mode, ResourceLimit,
};
use crate::taint::ApiSummaryTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitKind {
    Activity,
    Service,
    Receiver,
    Provider,
    Background,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntryCategory {
    LifecycleCallback,
    AsyncOperation,
    UiHandler,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegistrationSource {
    Manifest,
    Layout,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct EntryPoint {
    pub method: MethodRef,
    pub category: EntryCategory,
    pub registration: RegistrationSource,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Unit {
    pub name: String,
    pub kind: UnitKind,
    pub entry_points: Vec<EntryPoint>,
}

/// An entry point as declared in a manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct EntryDecl {
    pub class: String,
    pub method: String,
    #[serde(default)]
    pub param_types: Vec<String>,
    pub category: EntryCategory,
    pub registration_source: RegistrationSource,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct UnitDecl {
    pub name: String,
    pub kind: UnitKind,
    pub entry_points: Vec<EntryDecl>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EpsError {
    #[error("entry point {0} is not a method of the program")]
    UnknownMethod(MethodRef),
    #[error("unit {0} declares no entry points")]
    EmptyUnit(String),
    #[error("unit name {0} is declared twice")]
    DuplicateUnit(String),
    #[error("bad parameter type {0:?}")]
    BadType(String),
    #[error("no units to analyze")]
    NoUnits,
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

fn parse_type(p: &Program, s: &str) -> Result<Type, EpsError> {
    Ok(match s {
        "int" => Type::Int,
        "byte" => Type::Byte,
        "char" => Type::Char,
        "boolean" => Type::Boolean,
        c if p.is_declared(c) => Type::Class(c.into()),
        _ => return Err(EpsError::BadType(s.into())),
    })
}

/// Validates declared units against the program.
pub fn discover_entry_points(p: &Program, decls: &[UnitDecl]) -> Result<Vec<Unit>, EpsError> {
    let mut names = BTreeSet::new();
    let mut units = Vec::new();
    for d in decls {
        if !names.insert(d.name.as_str()) {
            return Err(EpsError::DuplicateUnit(d.name.clone()));
        }
        if d.entry_points.is_empty() {
            return Err(EpsError::EmptyUnit(d.name.clone()));
        }
        let mut entry_points = Vec::new();
        for e in &d.entry_points {
            let params = e
                .param_types
                .iter()
                .map(|t| parse_type(p, t))
                .collect::<Result<Vec<_>, _>>()?;
            let method = MethodRef::new(e.class.as_str(), e.method.as_str(), params);
            if p.method_id(&method).is_none() {
                return Err(EpsError::UnknownMethod(method));
            }
            entry_points.push(EntryPoint {
                method,
                category: e.category,
                registration: e.registration_source,
            });
        }
        units.push(Unit {
            name: d.name.clone(),
            kind: d.kind,
            entry_points,
        });
    }
    Ok(units)
}

fn framework_object(p: &Program, class: &ClassName, store: &mut Store) -> AbsValue {
    let op = ObjectPointer::framework(class.clone());
    for f in p.all_fields(class) {
        let v = crate::machine::domain::default_abs(&f.ty);
        store.join(&Addr::Field(op.clone(), f.name.clone()), &Val::singleton(v));
    }
    AbsValue::Object(op, class.clone())
}

fn ambient_param(p: &Program, t: &Type, store: &mut Store) -> Vec<AbsValue> {
    match t {
        Type::Int | Type::Byte | Type::Char => alloc::vec![AbsValue::AnyInt],
        Type::Boolean => alloc::vec![AbsValue::Bool(false), AbsValue::Bool(true)],
        Type::Void => alloc::vec![AbsValue::Void],
        Type::Class(c) if c.as_str() == STRING_CLASS => {
            alloc::vec![AbsValue::AnyStr, AbsValue::Null]
        }
        Type::Class(c) => alloc::vec![AbsValue::Null, framework_object(p, c, store)],
    }
}

/// Binds the receiver and parameters of every entry point to values the
/// framework could pass in: one framework object per class, any int, both
/// booleans, any string or null.
pub fn ambient_store(p: &Program, units: &[Unit], budget: usize) -> Store {
    let mut store = Store::new(budget);
    for e in units.iter().flat_map(|u| &u.entry_points) {
        let Some(id) = p.method_id(&e.method) else {
            continue;
        };
        let fp = FramePointer::entry(id);
        let m = p.method(id);
        if !m.is_static() {
            let this = framework_object(p, &e.method.class, &mut store);
            store.join(&Addr::reg(&fp, Reg::this()), &Val::singleton(this));
        }
        for (i, t) in m.params.iter().enumerate() {
            let vals = ambient_param(p, t, &mut store);
            let v = Val::from_values(vals, budget);
            store.join(&Addr::reg(&fp, Reg::param(i)), &v);
        }
    }
    store
}

/// Final-round analysis of one entry point.
#[derive(Debug, Clone)]
pub struct EntryResult {
    pub unit: String,
    pub entry: EntryPoint,
    pub result: AnalysisResult,
}

#[derive(Debug, Clone, Default)]
pub struct SaturationTrace {
    pub results: Vec<EntryResult>,
    /// Passes over each unit in the final round.
    pub unit_passes: BTreeMap<String, usize>,
    pub rounds: usize,
    pub store: Store,
    pub taint: TaintStore,
    pub kstore: Option<KStore>,
    pub incomplete: Option<ResourceLimit>,
    /// Steps after which the stores were not above their predecessors.
    pub chain_violations: u64,
    pub audit: Audit,
}

impl SaturationTrace {
    pub fn is_complete(&self) -> bool {
        self.incomplete.is_none()
    }
}

impl fmt::Display for SaturationTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} rounds, {} entry results, {} store entries",
            self.rounds,
            self.results.len(),
            self.store.len()
        )
    }
}

struct Saturator<'a> {
    p: &'a Program,
    summaries: &'a ApiSummaryTable,
    cfg: &'a AnalysisConfig,
    store: Store,
    taint: TaintStore,
    kstore: KStore,
    chain_violations: u64,
    audit: Audit,
    incomplete: Option<ResourceLimit>,
}

impl Saturator<'_> {
    fn analyze(&mut self, unit: &Unit, e: &EntryPoint) -> Result<EntryResult, EpsError> {
        let r = match self.cfg.mode {
            Mode::Pushdown => analyze_pushdown(
                self.p,
                self.summaries,
                &e.method,
                self.store.clone(),
                self.taint.clone(),
                self.cfg,
            )?,
            Mode::Finite => analyze_finite_with(
                self.p,
                self.summaries,
                &e.method,
                self.store.clone(),
                self.taint.clone(),
                self.kstore.clone(),
                self.cfg,
            )?,
        };
        if !(self.store.leq(&r.final_store) && self.taint.leq(&r.final_taint)) {
            self.chain_violations += 1;
        }
        self.store = r.final_store.clone();
        self.taint = r.final_taint.clone();
        if let Some(k) = &r.kstore {
            self.kstore = k.clone();
        }
        self.audit.joins += r.audit.joins;
        self.audit.monotonicity_violations += r.audit.monotonicity_violations;
        if self.incomplete.is_none() {
            self.incomplete = r.incomplete;
        }
        Ok(EntryResult {
            unit: unit.name.clone(),
            entry: e.clone(),
            result: r,
        })
    }

    fn snapshot(&self) -> (Store, TaintStore, KStore) {
        (self.store.clone(), self.taint.clone(), self.kstore.clone())
    }

    fn grew_since(&self, before: &(Store, TaintStore, KStore)) -> bool {
        before.0 != self.store || before.1 != self.taint || before.2 != self.kstore
    }

    /// Passes over `unit` until one adds nothing; returns the last pass.
    fn unit(&mut self, unit: &Unit) -> Result<(Vec<EntryResult>, usize), EpsError> {
        let mut passes = 0;
        loop {
            let before = self.snapshot();
            let mut results = Vec::new();
            for e in &unit.entry_points {
                results.push(self.analyze(unit, e)?);
                if self.incomplete.is_some() {
                    return Ok((results, passes + 1));
                }
            }
            passes += 1;
            log::debug!(
                "unit {} pass {passes}: {} store entries",
                unit.name,
                self.store.len()
            );
            if !self.grew_since(&before) {
                return Ok((results, passes));
            }
        }
    }
}

/// Saturates one unit from the given stores.
pub fn saturate_unit(
    p: &Program,
    summaries: &ApiSummaryTable,
    unit: &Unit,
    store: Store,
    taint: TaintStore,
    cfg: &AnalysisConfig,
) -> Result<SaturationTrace, EpsError> {
    let mut s = Saturator {
        p,
        summaries,
        cfg,
        store,
        taint,
        kstore: KStore::new(),
        chain_violations: 0,
        audit: Audit::default(),
        incomplete: None,
    };
    let (results, passes) = s.unit(unit)?;
    Ok(SaturationTrace {
        results,
        unit_passes: BTreeMap::from([(unit.name.clone(), passes)]),
        rounds: 1,
        kstore: (cfg.mode == Mode::Finite).then_some(s.kstore),
        store: s.store,
        taint: s.taint,
        incomplete: s.incomplete,
        chain_violations: s.chain_violations,
        audit: s.audit,
    })
}

/// Saturates all units, starting from the ambient bindings.
pub fn saturate_app(
    p: &Program,
    summaries: &ApiSummaryTable,
    units: &[Unit],
    cfg: &AnalysisConfig,
) -> Result<SaturationTrace, EpsError> {
    let store = ambient_store(p, units, cfg.int_constant_budget);
    saturate_app_from(p, summaries, units, store, TaintStore::new(), cfg)
}

/// Saturates all units starting from explicit stores.
pub fn saturate_app_from(
    p: &Program,
    summaries: &ApiSummaryTable,
    units: &[Unit],
    store: Store,
    taint: TaintStore,
    cfg: &AnalysisConfig,
) -> Result<SaturationTrace, EpsError> {
    if units.is_empty() {
        return Err(EpsError::NoUnits);
    }
    let mut s = Saturator {
        p,
        summaries,
        cfg,
        store,
        taint,
        kstore: KStore::new(),
        chain_violations: 0,
        audit: Audit::default(),
        incomplete: None,
    };
    let mut rounds = 0;
    let (results, unit_passes) = 'outer: loop {
        let before = s.snapshot();
        let mut results = Vec::new();
        let mut unit_passes = BTreeMap::new();
        rounds += 1;
        for u in units {
            let (r, passes) = s.unit(u)?;
            results.extend(r);
            unit_passes.insert(u.name.clone(), passes);
            if s.incomplete.is_some() {
                break 'outer (results, unit_passes);
            }
        }
        log::debug!("round {rounds}: {} store entries", s.store.len());
        if !s.grew_since(&before) {
            break (results, unit_passes);
        }
    };
    Ok(SaturationTrace {
        results,
        unit_passes,
        rounds,
        kstore: (cfg.mode == Mode::Finite).then_some(s.kstore),
        store: s.store,
        taint: s.taint,
        incomplete: s.incomplete,
        chain_violations: s.chain_violations,
        audit: s.audit,
    })
}
