use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec::Vec;

use super::*;
use crate::ir::{AExp, CExp, FieldName, InvokeKind};
use crate::taint::apply_summary;

pub(crate) fn push_context(ctx: &[StmtPos], site: StmtPos, k: usize) -> Vec<StmtPos> {
    let mut out: Vec<StmtPos> = ctx.to_vec();
    out.push(site);
    let excess = out.len().saturating_sub(k);
    out.drain(..excess);
    out
}

impl<'p> Machine<'p> {
    pub(crate) fn eval(&self, ae: &AExp, fp: &FramePointer, view: &StoreView<'_>) -> Val {
        let budget = view.store.budget();
        match ae {
            AExp::This => view.val(&self.reg(fp, Reg::this())).clone(),
            AExp::Name(r) => view.val(&self.reg(fp, r.clone())).clone(),
            AExp::True => Val::singleton(AbsValue::Bool(true)),
            AExp::False => Val::singleton(AbsValue::Bool(false)),
            AExp::Null => Val::singleton(AbsValue::Null),
            AExp::Void => Val::singleton(AbsValue::Void),
            AExp::Int(n) => Val::singleton(AbsValue::Int(*n)),
            AExp::Str(s) => Val::singleton(AbsValue::Str(s.clone())),
            AExp::Op(op, args) => {
                let vals: Vec<Val> = args.iter().map(|a| self.eval(a, fp, view)).collect();
                domain::apply_op(*op, &vals, budget)
            }
            AExp::InstanceOf(inner, class) => {
                let v = self.eval(inner, fp, view);
                let mut out = Val::new();
                for x in v.iter() {
                    let b = match x {
                        AbsValue::Object(_, c) => {
                            self.program.is_subclass(c, class).unwrap_or(false)
                        }
                        AbsValue::Str(_) | AbsValue::AnyStr => self
                            .program
                            .is_subclass(&crate::ir::STRING_CLASS.into(), class)
                            .unwrap_or(false),
                        _ => false,
                    };
                    out.insert(AbsValue::Bool(b), budget);
                }
                out
            }
        }
    }

    /// Taint of an atomic expression: the union over registers it reads.
    pub(crate) fn taint_of(&self, ae: &AExp, fp: &FramePointer, view: &StoreView<'_>) -> TaintSet {
        let mut regs = Vec::new();
        ae.registers(&mut regs);
        regs.into_iter().fold(TaintSet::EMPTY, |acc, r| {
            acc.union(view.taint_of(&self.reg(fp, r)))
        })
    }

    fn init_object(&self, op: &ObjectPointer, class: &ClassName, effects: &mut Effects) {
        for f in self.program.all_fields(class) {
            effects.val(
                Addr::Field(op.clone(), f.name.clone()),
                Val::singleton(default_abs(&f.ty)),
            );
        }
    }

    /// Successors of a state that does not consume the top frame.
    pub fn local_step(&self, q: &ControlState, view: &StoreView<'_>) -> LocalStep {
        let mut out = LocalStep::default();
        let Some(stmt) = self.stmt(q) else {
            out.effects.diagnostics.push(format!(
                "{} runs off the end of its body",
                self.program.method_ref(q.method)
            ));
            return out;
        };
        let next = q.at(q.index as usize + 1, Phase::Exec);
        let fp = &q.fp;
        let budget = view.store.budget();
        let eff = &mut out.effects;
        let trans = &mut out.transitions;
        if q.phase == Phase::AfterCall {
            if let Stmt::AssignComplex(dest, _) = stmt {
                let ret = self.reg(fp, Reg::ret());
                let v = view.val(&ret);
                if !v.is_empty() {
                    eff.val(self.reg(fp, dest.clone()), v.clone());
                    eff.taint(self.reg(fp, dest.clone()), view.taint_of(&ret));
                    trans.push(Transition::NoOp(next));
                }
            }
            return out;
        }
        match stmt {
            Stmt::Label(_) | Stmt::Nop | Stmt::Line(_) => trans.push(Transition::NoOp(next)),
            Stmt::Goto(l) => {
                if let Some(t) = self.program.label_target(q.method, l) {
                    trans.push(Transition::NoOp(q.at(t, Phase::Exec)));
                }
            }
            Stmt::If(cond, l) => {
                let v = self.eval(cond, fp, view);
                let (mut yes, mut no) = (false, false);
                for x in v.iter() {
                    match x.truthiness() {
                        Some(true) => yes = true,
                        Some(false) => no = true,
                        None => {
                            yes = true;
                            no = true;
                        }
                    }
                }
                if yes {
                    if let Some(t) = self.program.label_target(q.method, l) {
                        trans.push(Transition::NoOp(q.at(t, Phase::Exec)));
                    }
                }
                if no {
                    trans.push(Transition::NoOp(next));
                }
            }
            Stmt::AssignAtomic(dest, ae) => {
                let v = self.eval(ae, fp, view);
                if !v.is_empty() {
                    eff.val(self.reg(fp, dest.clone()), v);
                    eff.taint(self.reg(fp, dest.clone()), self.taint_of(ae, fp, view));
                    trans.push(Transition::NoOp(next));
                }
            }
            Stmt::MoveFromRet(dest) => {
                let ret = self.reg(fp, Reg::ret());
                let v = view.val(&ret);
                if !v.is_empty() {
                    eff.val(self.reg(fp, dest.clone()), v.clone());
                    eff.taint(self.reg(fp, dest.clone()), view.taint_of(&ret));
                    trans.push(Transition::NoOp(next));
                }
            }
            Stmt::AssignComplex(dest, CExp::New(class)) => {
                let ctx = if self.config.heap_context {
                    fp.ctx.clone()
                } else {
                    Vec::new()
                };
                let op = ObjectPointer {
                    site: domain::AllocSite::Stmt(q.pos()),
                    ctx,
                };
                eff.val(
                    self.reg(fp, dest.clone()),
                    Val::singleton(AbsValue::Object(op.clone(), class.clone())),
                );
                self.init_object(&op, class, eff);
                trans.push(Transition::NoOp(next));
            }
            Stmt::AssignComplex(_, CExp::Invoke { .. }) => self.invoke(q, stmt, view, &mut out),
            Stmt::FieldPut {
                object,
                field,
                value,
            } => {
                let objs = self.eval(object, fp, view);
                let v = self.eval(value, fp, view);
                if objs.objects().next().is_some() && !v.is_empty() {
                    let t = self.taint_of(value, fp, view);
                    for (op, _) in objs.objects() {
                        let a = Addr::Field(op.clone(), field.clone());
                        eff.val(a.clone(), v.clone());
                        eff.taint(a, t);
                    }
                    trans.push(Transition::NoOp(next));
                }
            }
            Stmt::FieldGet {
                dest,
                object,
                field,
            } => {
                let objs = self.eval(object, fp, view);
                if objs.objects().next().is_some() {
                    let (v, t) = self.read_field(&objs, field, view, budget);
                    eff.val(self.reg(fp, dest.clone()), v);
                    eff.taint(self.reg(fp, dest.clone()), t);
                    trans.push(Transition::NoOp(next));
                }
            }
            Stmt::PushHandler(class, label) => {
                let frame = Frame::Handler {
                    class: class.clone(),
                    label: label.clone(),
                    owner: fp.clone(),
                    site: q.pos(),
                };
                trans.push(Transition::Push(frame, next));
            }
            Stmt::Return(_) | Stmt::Throw(_) | Stmt::PopHandler => {}
        }
        out
    }

    fn read_field(
        &self,
        objs: &Val,
        field: &FieldName,
        view: &StoreView<'_>,
        budget: usize,
    ) -> (Val, TaintSet) {
        let mut v = Val::new();
        let mut t = TaintSet::EMPTY;
        for (op, _) in objs.objects() {
            let a = Addr::Field(op.clone(), field.clone());
            v.join(view.val(&a), budget);
            t.join(view.taint_of(&a));
        }
        (v, t)
    }

    fn invoke(&self, q: &ControlState, stmt: &Stmt, view: &StoreView<'_>, out: &mut LocalStep) {
        let Stmt::AssignComplex(
            _,
            CExp::Invoke {
                kind,
                args,
                arg_types,
                class,
                method,
            },
        ) = stmt
        else {
            return;
        };
        let fp = &q.fp;
        let vals: Vec<Val> = args.iter().map(|a| self.eval(a, fp, view)).collect();
        if vals.iter().any(Val::is_empty) {
            return;
        }
        let taints: Vec<TaintSet> = args.iter().map(|a| self.taint_of(a, fp, view)).collect();
        let after = q.at(q.index as usize, Phase::AfterCall);
        let ret = self.reg(fp, Reg::ret());
        let eff = &mut out.effects;

        let matched: Vec<_> = self
            .summaries
            .matching(class.as_str(), method.as_str())
            .collect();
        if !matched.is_empty() {
            let budget = view.store.budget();
            let mut ret_val = Val::new();
            let mut ret_taint = TaintSet::EMPTY;
            let mut sinks = BTreeSet::new();
            let mut sources = TaintSet::EMPTY;
            let mut perms = BTreeSet::new();
            for s in matched {
                let o = apply_summary(s, &vals, &taints);
                ret_val.join(&o.ret_val, budget);
                ret_taint.join(o.ret_taint);
                sinks.extend(o.sink_hits);
                sources.join(o.sources);
                perms.extend(s.permissions.iter().cloned());
            }
            eff.val(ret.clone(), ret_val);
            eff.taint(ret, ret_taint);
            for category in sources.iter() {
                eff.events.push(Event::Source {
                    state: q.clone(),
                    category,
                });
            }
            for (category, kind) in sinks {
                eff.events.push(Event::Sink {
                    state: q.clone(),
                    category,
                    kind,
                });
            }
            for permission in perms {
                eff.events.push(Event::Permission {
                    state: q.clone(),
                    permission,
                });
            }
            out.transitions.push(Transition::NoOp(after));
            return;
        }

        // callee -> receiver objects bound to `this`
        let mut callees: BTreeMap<MethodId, Option<Val>> = BTreeMap::new();
        let mut unresolved = false;
        let budget = view.store.budget();
        match kind {
            InvokeKind::Static => {
                match self.program.resolve_method(class, method, arg_types, *kind) {
                    Ok(id) => {
                        callees.insert(id, None);
                    }
                    Err(_) => unresolved = true,
                }
            }
            InvokeKind::Direct | InvokeKind::Super => {
                let recv: Val = Val::from_values(
                    vals[0]
                        .iter()
                        .filter(|v| matches!(v, AbsValue::Object(..)))
                        .cloned(),
                    budget,
                );
                if recv.is_empty() {
                    return;
                }
                match self.program.resolve_method(class, method, arg_types, *kind) {
                    Ok(id) => {
                        callees.insert(id, Some(recv));
                    }
                    Err(_) => unresolved = true,
                }
            }
            InvokeKind::Virtual | InvokeKind::Interface => {
                if vals[0].objects().next().is_none() {
                    return;
                }
                for (op, c) in vals[0].objects() {
                    match self.program.resolve_method(c, method, arg_types, *kind) {
                        Ok(id) => {
                            callees
                                .entry(id)
                                .or_insert_with(|| Some(Val::new()))
                                .get_or_insert_with(Val::new)
                                .insert(AbsValue::Object(op.clone(), c.clone()), budget);
                        }
                        Err(_) => unresolved = true,
                    }
                }
            }
        }
        if unresolved {
            eff.diagnostics.push(format!(
                "unresolved call {class}.{method} at {}; treated as returning void",
                DisplayStmtPos(self.program, &q.pos())
            ));
            if callees.is_empty() {
                eff.val(ret, Val::singleton(AbsValue::Void));
                out.transitions.push(Transition::NoOp(after));
                return;
            }
        }
        let site = q.pos();
        let offset = usize::from(kind.has_receiver());
        for (callee, recv) in callees {
            let callee_fp = FramePointer {
                method: callee,
                ctx: push_context(&fp.ctx, site, self.config.k),
            };
            if let Some(recv) = recv {
                eff.val(self.reg(&callee_fp, Reg::this()), recv);
                eff.taint(self.reg(&callee_fp, Reg::this()), taints[0]);
            }
            for (j, (v, t)) in vals[offset..].iter().zip(&taints[offset..]).enumerate() {
                eff.val(self.reg(&callee_fp, Reg::param(j)), v.clone());
                eff.taint(self.reg(&callee_fp, Reg::param(j)), *t);
            }
            let frame = Frame::Fun {
                fp: fp.clone(),
                ret: site,
            };
            let entry = ControlState::new(callee, 0, Phase::Exec, callee_fp);
            out.transitions.push(Transition::Push(frame, entry));
        }
    }

    /// Thrown objects still in flight at an unwind state.
    fn in_flight(&self, q: &ControlState, view: &StoreView<'_>) -> Vec<(ObjectPointer, ClassName)> {
        let Some(Stmt::Throw(ae)) = self.stmt(q) else {
            return Vec::new();
        };
        let excluded: &BTreeSet<ClassName> = match &q.phase {
            Phase::Unwind(ex) => ex,
            _ => &BTreeSet::new(),
        };
        let v = self.eval(ae, &q.fp, view);
        v.objects()
            .filter(|(_, c)| {
                !excluded
                    .iter()
                    .any(|e| self.program.is_subclass(c, e).unwrap_or(false))
            })
            .map(|(op, c)| (op.clone(), c.clone()))
            .collect()
    }

    /// Successors of a pop state given the frame on top (`None`: empty stack).
    pub fn pop_step(&self, q: &ControlState, top: Option<&Frame>, view: &StoreView<'_>) -> PopStep {
        let mut out = PopStep::default();
        let Some(stmt) = self.stmt(q) else {
            return out;
        };
        let budget = view.store.budget();
        match (stmt, &q.phase) {
            (Stmt::Return(ae), Phase::Exec) => {
                let v = self.eval(ae, &q.fp, view);
                if v.is_empty() {
                    return out;
                }
                match top {
                    None => {
                        let t = self.taint_of(ae, &q.fp, view);
                        out.effects.val(self.reg(&q.fp, Reg::ret()), v);
                        out.effects.taint(self.reg(&q.fp, Reg::ret()), t);
                        out.outcomes
                            .push(PopOutcome::Terminal(TerminalKind::Returned));
                    }
                    Some(Frame::Handler { .. }) => {
                        out.outcomes.push(PopOutcome::Continue(q.clone()))
                    }
                    Some(Frame::Fun { fp, ret }) => {
                        let t = self.taint_of(ae, &q.fp, view);
                        out.effects.val(self.reg(fp, Reg::ret()), v);
                        out.effects.taint(self.reg(fp, Reg::ret()), t);
                        out.outcomes.push(PopOutcome::Continue(ControlState::new(
                            ret.method,
                            ret.index as usize,
                            Phase::AfterCall,
                            fp.clone(),
                        )));
                    }
                }
            }
            (Stmt::PopHandler, Phase::Exec) => match top {
                Some(Frame::Handler { .. }) => out.outcomes.push(PopOutcome::Continue(
                    q.at(q.index as usize + 1, Phase::Exec),
                )),
                Some(Frame::Fun { .. }) => out.outcomes.push(PopOutcome::Malformed(format!(
                    "pop-handler over a call frame at {}",
                    DisplayState(self.program, q)
                ))),
                None => out.outcomes.push(PopOutcome::Malformed(format!(
                    "pop-handler on an empty stack at {}",
                    DisplayState(self.program, q)
                ))),
            },
            (Stmt::Throw(ae), _) => {
                let thrown = self.in_flight(q, view);
                if thrown.is_empty() {
                    return out;
                }
                match top {
                    None => out
                        .outcomes
                        .push(PopOutcome::Terminal(TerminalKind::Uncaught)),
                    Some(Frame::Fun { .. }) => out.outcomes.push(PopOutcome::Continue(q.clone())),
                    Some(Frame::Handler {
                        class,
                        label,
                        owner,
                        ..
                    }) => {
                        let (caught, passed): (Vec<_>, Vec<_>) =
                            thrown.into_iter().partition(|(_, c)| {
                                self.program.is_subclass(c, class).unwrap_or(false)
                            });
                        if !caught.is_empty() {
                            if let Some(target) = self.program.label_target(owner.method, label) {
                                let exn = self.reg(owner, Reg::exn());
                                let v = Val::from_values(
                                    caught.into_iter().map(|(op, c)| AbsValue::Object(op, c)),
                                    budget,
                                );
                                out.effects.val(exn.clone(), v);
                                out.effects.taint(exn, self.taint_of(ae, &q.fp, view));
                                out.outcomes.push(PopOutcome::Continue(ControlState::new(
                                    owner.method,
                                    target,
                                    Phase::Exec,
                                    owner.clone(),
                                )));
                            }
                        }
                        if !passed.is_empty() {
                            let mut excluded = match &q.phase {
                                Phase::Unwind(ex) => ex.clone(),
                                _ => BTreeSet::new(),
                            };
                            excluded.insert(class.clone());
                            out.outcomes.push(PopOutcome::Continue(
                                q.at(q.index as usize, Phase::Unwind(excluded)),
                            ));
                        }
                    }
                }
            }
            _ => {}
        }
        out
    }
}
