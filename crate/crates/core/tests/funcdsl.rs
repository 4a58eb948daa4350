use masterop::funcdsl::{
    compile_text, parse, print, to_handle, validate, BinaryOp, DslContext, Expr, Family, MetadataOverrides, UnaryOp,
    Var,
};
use masterop::{Dependence, Error, Normalization};
use proptest::prelude::*;

fn ctx(dim: usize) -> DslContext {
    DslContext { dim, s: 0.5, normalization: Normalization::Normalized }
}

#[test]
fn precedence() {
    let u = compile_text("2+3*x1^2", &ctx(1)).unwrap();
    assert_eq!(u.eval(&[2.0], 0.0), 14.0);
    let u = compile_text("-x1^2", &ctx(1)).unwrap();
    assert_eq!(u.eval(&[3.0], 0.0), -9.0);
    let u = compile_text("1-2-3", &ctx(1)).unwrap();
    assert_eq!(u.eval(&[0.0], 0.0), -4.0);
    let u = compile_text("8/4/2", &ctx(1)).unwrap();
    assert_eq!(u.eval(&[0.0], 0.0), 1.0);
    let u = compile_text("2*t^-1", &ctx(1)).unwrap();
    assert_eq!(u.eval(&[0.0], 4.0), 0.5);
}

#[test]
fn syntax_errors_carry_columns() {
    for (text, col) in [("cos(x1", 7), ("1 + ", 5), ("x1 ^ t", 6), ("foo(1)", 1), ("3 $ 4", 3)] {
        match parse(text) {
            Err(Error::Syntax { column, .. }) => assert_eq!(column, col, "{text}"),
            other => panic!("{text}: {other:?}"),
        }
    }
}

#[test]
fn validation_against_the_context() {
    assert!(matches!(compile_text("x3", &ctx(2)), Err(Error::Validation(_))));
    assert!(matches!(compile_text("w(4, 0.5)", &ctx(1)), Err(Error::Constraint(_))));
    assert!(compile_text("w(4, 0.75)", &ctx(1)).is_ok());
    assert!(validate(&parse("phi(2, 1, 1)").unwrap(), &ctx(3)).is_ok());
}

#[test]
fn dependence_follows_usage() {
    let o = MetadataOverrides::default();
    let d = |t: &str| to_handle(&parse(t).unwrap(), &ctx(2), &o).unwrap().dependence;
    assert_eq!(d("cos(x1)*x2"), Dependence::SpaceOnly);
    assert_eq!(d("exp(t)"), Dependence::TimeOnly);
    assert_eq!(d("x1+t"), Dependence::Both);
    assert_eq!(d("3*2"), Dependence::Constant);
}

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (0.0f64..100.0).prop_map(Expr::Num),
        (1usize..=3).prop_map(|i| Expr::Var(Var::X(i))),
        Just(Expr::Var(Var::T)),
        (1u32..20, 0.1f64..3.0, 0.1f64..3.0).prop_map(|(j, alpha, beta)| Expr::Family(Family::Phi { j, alpha, beta })),
        (1u32..20, 0.6f64..3.0).prop_map(|(j, gamma)| Expr::Family(Family::W { j, gamma })),
    ]
}

fn expr() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(5, 48, 2, |inner| {
        let unary = prop_oneof![
            Just(UnaryOp::Neg),
            Just(UnaryOp::Exp),
            Just(UnaryOp::Cos),
            Just(UnaryOp::Sin),
            Just(UnaryOp::Abs),
            Just(UnaryOp::Pos),
            Just(UnaryOp::Sqrt),
            Just(UnaryOp::Bump),
        ];
        let binary = prop_oneof![Just(BinaryOp::Add), Just(BinaryOp::Sub), Just(BinaryOp::Mul), Just(BinaryOp::Div)];
        prop_oneof![
            (unary, inner.clone()).prop_map(|(op, a)| Expr::Unary(op, Box::new(a))),
            (binary, inner.clone(), inner.clone()).prop_map(|(op, a, b)| Expr::Binary(op, Box::new(a), Box::new(b))),
            (inner, -4.0f64..4.0).prop_map(|(a, p)| Expr::Pow(Box::new(a), p)),
        ]
    })
}

proptest! {
    #[test]
    fn print_parse_round_trip(e in expr()) {
        let text = print(&e);
        let back = parse(&text).unwrap();
        prop_assert_eq!(&back, &e, "{}", text);
        prop_assert_eq!(print(&back), text);
    }

    #[test]
    fn evaluation_is_pure(e in expr(), x in prop::collection::vec(-5.0f64..5.0, 3), t in -5.0f64..5.0) {
        let u = to_handle(&e, &ctx(3), &MetadataOverrides::default()).unwrap();
        let a = u.eval(&x, t);
        let b = u.eval(&x, t);
        prop_assert_eq!(a.to_bits(), b.to_bits());
    }
}
