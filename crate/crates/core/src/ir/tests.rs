use super::*;
use alloc::vec;

const TWO: &str = r#"
(public class A extends java/lang/Object
  ((field private f int))
  ((method public m () int (throws) (limit 1)
     (line 3)
     (return 1))
   (method static s (int) void (limit 2)
     (return))))
(public class B extends A
  ()
  ((method public m () int (limit 0)
     (label top)
     (nop)
     (if (lt 1 2) (goto top))
     (return 2))))
"#;

fn two() -> Program {
    parse_program(TWO).unwrap()
}

#[test]
fn parses_minimal_class() {
    let p = parse_program("(public class A extends java/lang/Object () ())").unwrap();
    let c = p.class(&"A".into()).unwrap();
    assert!(c.fields.is_empty() && c.methods.is_empty());
    assert!(c.attributes.contains(&Attribute::Public));
}

#[test]
fn nop_statement() {
    let p =
        parse_program("(class A extends java/lang/Object () ((method f () void (nop) (return))))")
            .unwrap();
    let id = p.method_by_name("A", "f").unwrap();
    assert_eq!(p.method(id).body, vec![Stmt::Nop, Stmt::Return(AExp::Void)]);
}

#[test]
fn self_extension_is_a_cycle() {
    let e = parse_program("(class A extends A () ())").unwrap_err();
    assert!(matches!(e.kind, ParseErrorKind::HierarchyCycle(_)));
    let e = parse_program("(class A extends B () ()) (class B extends A () ())").unwrap_err();
    assert!(matches!(e.kind, ParseErrorKind::HierarchyCycle(_)));
}

#[test]
fn rejects_malformed_programs() {
    type Case = (&'static str, fn(&ParseErrorKind) -> bool);
    let cases: &[Case] = &[
        (
            "(class A extends java/lang/Object () ((method f () void (goto nowhere))))",
            |k| matches!(k, ParseErrorKind::DanglingLabel(_)),
        ),
        (
            "(class A extends java/lang/Object () ((method f () void (frobnicate))))",
            |k| matches!(k, ParseErrorKind::UnknownStatement(_)),
        ),
        (
            "(class A extends java/lang/Object () ((method f () void (nop 1))))",
            |k| matches!(k, ParseErrorKind::Arity(_)),
        ),
        (
            "(class A extends Missing () ())",
            |k| matches!(k, ParseErrorKind::UndeclaredClass(_)),
        ),
        (
            "(class A extends java/lang/Object () ((method f (int int) void (limit 1) (return))))",
            |k| matches!(k, ParseErrorKind::LimitTooSmall { .. }),
        ),
        (
            "(class A extends java/lang/Object () ((method f () void (label x) (label x) (return))))",
            |k| matches!(k, ParseErrorKind::DuplicateLabel(_)),
        ),
        (
            "(class A extends java/lang/Object () ((method f () void (return)) (method f () int (return 1))))",
            |k| matches!(k, ParseErrorKind::DuplicateMethod(_)),
        ),
        (
            "(class A extends java/lang/Object ((field x int) (field x int)) ())",
            |k| matches!(k, ParseErrorKind::DuplicateField(_)),
        ),
        (
            "(class A extends java/lang/Object () ((method f () void (assign x (invoke-virtual () () A.f)) (return))))",
            |k| matches!(k, ParseErrorKind::InvokeTypes),
        ),
        (
            "(class A extends java/lang/Object () ((method f () void (line 0) (return))))",
            |k| matches!(k, ParseErrorKind::NonPositiveLine),
        ),
        (
            "(class java/lang/String extends java/lang/Object () ())",
            |k| matches!(k, ParseErrorKind::BuiltinRedeclared(_)),
        ),
        (
            "(class A extends java/lang/Object () ((method f () void)))",
            |k| matches!(k, ParseErrorKind::EmptyBody(_)),
        ),
    ];
    for (text, check) in cases {
        let e = parse_program(text).expect_err(text);
        assert!(check(&e.kind), "{text}: got {e}");
    }
}

#[test]
fn errors_carry_positions() {
    let e =
        parse_program("(class A extends java/lang/Object ()\n ((method f () void\n   (bogus))))")
            .unwrap_err();
    assert_eq!(e.pos, Pos { line: 3, col: 4 });
}

#[test]
fn statements_at_returns_suffix() {
    let p = parse_program(
        "(class A extends java/lang/Object () (
           (method f () void (label x) (nop) (return void))
           (method g () void (nop) (label y) (goto y))))",
    )
    .unwrap();
    let f = MethodRef::new("A", "f", vec![]);
    assert_eq!(
        p.statements_at(&f, &"x".into()).unwrap(),
        &[Stmt::Nop, Stmt::Return(AExp::Void)]
    );
    assert!(matches!(
        p.statements_at(&f, &"nope".into()),
        Err(IrError::UnknownLabel { .. })
    ));
    let g = MethodRef::new("A", "g", vec![]);
    assert_eq!(
        p.statements_at(&g, &"y".into()).unwrap(),
        &[Stmt::Goto("y".into())]
    );
}

#[test]
fn method_resolution_walks_hierarchy() {
    let p = parse_program(
        "(class A extends java/lang/Object () (
            (method m () void (return)) (method only () void (return))))
         (class B extends A () ((method m () void (return))))",
    )
    .unwrap();
    let name = |id| p.method_ref(id).class.0.clone();
    let r = |c: &str, m: &str, k| p.resolve_method(&c.into(), &m.into(), &[], k);
    assert_eq!(name(r("B", "m", InvokeKind::Virtual).unwrap()), "B");
    assert_eq!(name(r("B", "only", InvokeKind::Virtual).unwrap()), "A");
    assert_eq!(name(r("B", "m", InvokeKind::Super).unwrap()), "A");
    assert_eq!(name(r("B", "only", InvokeKind::Direct).unwrap()), "A");
    assert!(r("A", "missing", InvokeKind::Virtual).is_err());
}

#[test]
fn subclass_queries() {
    let p = two();
    let (a, b, o) = (
        ClassName::from("A"),
        ClassName::from("B"),
        ClassName::from(ROOT_CLASS),
    );
    assert!(p.is_subclass(&a, &a).unwrap());
    assert!(p.is_subclass(&b, &a).unwrap());
    assert!(!p.is_subclass(&a, &b).unwrap());
    assert!(p.is_subclass(&a, &o).unwrap());
    assert!(p
        .is_subclass(
            &"java/lang/RuntimeException".into(),
            &"java/lang/Throwable".into()
        )
        .unwrap());
    assert!(matches!(
        p.is_subclass(&"Nope".into(), &a),
        Err(IrError::UnknownClass(_))
    ));
}

#[test]
fn line_lookup_prefers_line_statements() {
    let p = two();
    let am = p.method_by_name("A", "m").unwrap();
    assert_eq!(p.line_at(am, 1), 3);
    // no line statements: falls back to the source line of the statement
    let bm = p.method_by_name("B", "m").unwrap();
    assert_eq!(p.line_at(bm, 3), 15);
}

#[test]
fn printing_round_trips() {
    let p = two();
    let text = print_program(&p);
    let q = parse_program(&text).unwrap();
    assert_eq!(p, q);
    assert_eq!(text, print_program(&q));
}

#[test]
fn string_literals_and_instance_of_round_trip() {
    let src = r#"(class A extends java/lang/Object () ((method f () boolean
        (assign s "a \"quoted\" string")
        (assign t (add s "x"))
        (return (instance-of this java/lang/Object)))))"#;
    let p = parse_program(src).unwrap();
    assert_eq!(parse_program(&print_program(&p)).unwrap(), p);
}
