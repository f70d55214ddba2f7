use super::ast::{add, branch, call, div, mul, neg, pow, sub, BinOp, Expr, Func, Var};

/// Symbolic partial derivative with respect to `var`.
///
/// `abs`, `sat`, `min` and `max` use the one-sided derivative taken from the
/// right, so at a kink the result is the directional derivative along `+var`.
/// Parameter slots are treated as constants.
pub fn differentiate(expr: &Expr, var: Var) -> Expr {
    if !expr.depends_on(var) {
        return Expr::Const(0.0);
    }
    match expr {
        Expr::Const(_) => Expr::Const(0.0),
        Expr::Var(v) => Expr::Const(if *v == var { 1.0 } else { 0.0 }),
        Expr::Neg(a) => neg(differentiate(a, var)),
        Expr::Binary(op, a, b) => {
            let da = differentiate(a, var);
            let db = differentiate(b, var);
            let (a, b) = ((**a).clone(), (**b).clone());
            match op {
                BinOp::Add => add(da, db),
                BinOp::Sub => sub(da, db),
                BinOp::Mul => add(mul(da, b.clone()), mul(a, db)),
                BinOp::Div => {
                    if db.is_const(0.0) {
                        div(da, b)
                    } else {
                        div(sub(mul(da, b.clone()), mul(a, db)), pow(b, Expr::Const(2.0)))
                    }
                }
                // exponents are constant by construction
                BinOp::Pow => {
                    let reduced = sub(b.clone(), Expr::Const(1.0));
                    mul(mul(b, pow(a, reduced)), da)
                }
            }
        }
        Expr::Call(func, args) => {
            let a = args[0].clone();
            let da = differentiate(&a, var);
            match func {
                Func::Sin => mul(call(Func::Cos, vec![a]), da),
                Func::Cos => neg(mul(call(Func::Sin, vec![a]), da)),
                Func::Exp => mul(call(Func::Exp, vec![a]), da),
                Func::Tanh => {
                    let t = call(Func::Tanh, vec![a]);
                    mul(sub(Expr::Const(1.0), pow(t, Expr::Const(2.0))), da)
                }
                Func::Sqrt => div(da, mul(Expr::Const(2.0), call(Func::Sqrt, vec![a]))),
                Func::Abs => branch(a, neg(da.clone()), call(Func::Abs, vec![da.clone()]), da),
                Func::Sat => {
                    let inner = branch(
                        add(a.clone(), Expr::Const(1.0)),
                        Expr::Const(0.0),
                        call(Func::Max, vec![Expr::Const(0.0), da.clone()]),
                        da.clone(),
                    );
                    branch(
                        sub(a, Expr::Const(1.0)),
                        inner,
                        call(Func::Min, vec![Expr::Const(0.0), da]),
                        Expr::Const(0.0),
                    )
                }
                Func::Min | Func::Max => {
                    let b = args[1].clone();
                    let db = differentiate(&b, var);
                    let tie = call(*func, vec![da.clone(), db.clone()]);
                    let gap = sub(a, b);
                    if *func == Func::Min {
                        branch(gap, da, tie, db)
                    } else {
                        branch(gap, db, tie, da)
                    }
                }
                Func::Branch => branch(
                    args[0].clone(),
                    differentiate(&args[1], var),
                    differentiate(&args[2], var),
                    differentiate(&args[3], var),
                ),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_str, Bindings};

    fn d(src: &str) -> Expr {
        differentiate(&parse_str(src).unwrap(), Var::x(1))
    }

    fn at(e: &Expr, x: f64) -> f64 {
        e.evaluate(&Bindings::states(&[x])).unwrap()
    }

    #[test]
    fn power_rule() {
        assert_eq!(d("x1^2").to_string(), "2.0 * x1");
        assert_eq!(at(&d("x1^3"), 2.0), 12.0);
    }

    #[test]
    fn chain_rule_through_sin() {
        assert_eq!(at(&d("sin(x1)"), 0.0), 1.0);
        assert!((at(&d("sin(2*x1)"), 0.3) - 2.0 * (0.6f64).cos()).abs() < 1e-15);
    }

    #[test]
    fn linearity() {
        let e = differentiate(&parse_str("0.5*x1 + x2").unwrap(), Var::x(1));
        assert_eq!(e, Expr::Const(0.5));
    }

    #[test]
    fn one_sided_rules_at_kinks() {
        assert_eq!(at(&d("abs(x1)"), 0.0), 1.0);
        assert_eq!(at(&d("abs(x1)"), -2.0), -1.0);
        assert_eq!(at(&d("abs(-x1)"), 0.0), 1.0);
        // sat: right derivative is 1 at -1 and 0 at +1
        assert_eq!(at(&d("sat(x1)"), -1.0), 1.0);
        assert_eq!(at(&d("sat(x1)"), 1.0), 0.0);
        assert_eq!(at(&d("sat(x1)"), 0.2), 1.0);
        assert_eq!(at(&d("sat(x1)"), 3.0), 0.0);
        assert_eq!(at(&d("sat(-x1)"), 1.0), 0.0);
        assert_eq!(at(&d("sat(-x1)"), -1.0), -1.0);
        // min(x, 0) at 0: right derivative 0; max(x, 0) at 0: 1
        assert_eq!(at(&d("min(x1, 0)"), 0.0), 0.0);
        assert_eq!(at(&d("max(x1, 0)"), 0.0), 1.0);
        assert_eq!(at(&d("max(x1, 2*x1)"), 0.0), 2.0);
        assert_eq!(at(&d("max(x1, 2*x1)"), -1.0), 1.0);
    }

    #[test]
    fn quotient_and_tanh() {
        let e = d("1/(1+x1^2)");
        let x: f64 = 0.7;
        let expect = -2.0 * x / (1.0 + x * x).powi(2);
        assert!((at(&e, x) - expect).abs() < 1e-15);
        let t = d("tanh(x1)");
        assert!((at(&t, 0.4) - (1.0 - 0.4f64.tanh().powi(2))).abs() < 1e-15);
    }

    #[test]
    fn parameters_are_constant() {
        let e = d("s*x1");
        let env = Bindings {
            x: &[1.0],
            s: &[3.0],
            ..Default::default()
        };
        assert_eq!(e.evaluate(&env).unwrap(), 3.0);
    }
}
