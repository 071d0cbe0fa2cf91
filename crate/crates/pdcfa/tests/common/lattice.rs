//! Generators for stores and taint stores.

use pdcfa::core::ir::{FieldName, MethodId, Reg};
use pdcfa::core::machine::{AbsValue, Addr, FramePointer, ObjectPointer, Store, TaintStore, Val};
use pdcfa::core::taint::{TaintSet, TaintVal};
use proptest::prelude::*;

pub const BUDGET: usize = 3;

pub fn addr() -> impl Strategy<Value = Addr> {
    prop_oneof![
        (0u32..3, 0usize..3)
            .prop_map(|(m, r)| Addr::reg(&FramePointer::entry(MethodId(m)), Reg::param(r))),
        (0u32..2, prop_oneof![Just("f"), Just("g")]).prop_map(|(c, f)| Addr::Field(
            ObjectPointer::framework(format!("C{c}").as_str().into()),
            FieldName::new(f)
        )),
    ]
}

pub fn value() -> impl Strategy<Value = AbsValue> {
    prop_oneof![
        (-3i64..6).prop_map(AbsValue::Int),
        Just(AbsValue::AnyInt),
        prop_oneof![Just("a"), Just("b"), Just("c"), Just("d")]
            .prop_map(|s| AbsValue::Str(s.into())),
        Just(AbsValue::AnyStr),
        any::<bool>().prop_map(AbsValue::Bool),
        Just(AbsValue::Null),
        Just(AbsValue::Void),
    ]
}

pub fn store() -> impl Strategy<Value = Store> {
    prop::collection::vec((addr(), prop::collection::vec(value(), 0..5)), 0..6).prop_map(|binds| {
        let mut s = Store::new(BUDGET);
        for (a, vs) in binds {
            s.join(&a, &Val::from_values(vs, BUDGET));
        }
        s
    })
}

pub fn taint_store() -> impl Strategy<Value = TaintStore> {
    prop::collection::vec(
        (addr(), prop::collection::vec(0..TaintVal::ALL.len(), 0..4)),
        0..6,
    )
    .prop_map(|binds| {
        let mut s = TaintStore::new();
        for (a, ts) in binds {
            let mut set = TaintSet::default();
            for t in ts {
                set.insert(TaintVal::ALL[t]);
            }
            s.join(&a, set);
        }
        s
    })
}

pub fn join(a: &Store, b: &Store) -> Store {
    let mut out = a.clone();
    out.join_store(b);
    out
}

pub fn tjoin(a: &TaintStore, b: &TaintStore) -> TaintStore {
    let mut out = a.clone();
    out.join_store(b);
    out
}
